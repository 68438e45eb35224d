//! Independent oracles for the propagators, the channel amplitudes and the
//! closed forms.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex;

use nanotip::dyson::{
    additivity, additivity_closed_form, additivity_coefficients, additivity_maxima,
    channel_amplitude, channel_amplitudes, enumerate_orderings, scaling_probability, visibility,
    visibility_coefficients, visibility_from_intensities, ColorDrive,
};
use nanotip::scans::{run_scan, Engine, Locus, ScanConfig, ScanKind, OMEGA, TWO_OMEGA};
use nanotip::tdse::{emission_probability, propagate, propagate_checked};
use nanotip::units::{intensity_to_peak_field, photon_energy, UnitSystem};
use nanotip::{ChannelSpec, Field, Grid, Levels, Pulse};

const HBAR: f64 = 0.6582119569;

fn w800() -> f64 {
    photon_energy(800.0).unwrap()
}

/// `E⁺(t)` written out from the pulse parameters.
fn eplus(p: &Pulse, t: f64) -> Complex<f64> {
    let omega = 2.0 * PI * 299.792458 / p.wavelength;
    let x = (t - p.delay) / p.fwhm;
    let amp = 0.5 * p.peak_field() * p.polarization_angle.to_radians().cos()
        * (-2.0 * LN_2 * x * x).exp();
    Complex::from_polar(amp, -(omega * (t - p.delay) + p.carrier_phase))
}

fn rel(a: Complex<f64>, b: Complex<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn first_order_matches_quadrature() {
    let p = Pulse::new("omega", 800.0, 1e10, 30.0);
    let f = Field::single(p.clone());
    let grid = Grid::covering(&f, f.shortest_period() / 100.0, 4.0).unwrap();
    let ch: ChannelSpec = "omega:1".parse().unwrap();
    for spacing in [w800(), w800() + 0.02] {
        let d = 0.05;
        let sys = Levels::two_level(spacing, d);
        let got = channel_amplitude(&sys, &f, &ch, &grid).unwrap().value;

        // Composite Simpson on a fine grid.
        let w10 = spacing / HBAR;
        let n = 200_000;
        let (a, b) = (-150.0, 150.0);
        let h = (b - a) / n as f64;
        let mut sum = Complex::new(0.0, 0.0);
        for k in 0..=n {
            let t = a + h * k as f64;
            let wgt = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            sum += Complex::from_polar(1.0, w10 * t) * eplus(&p, t) * wgt;
        }
        let want = Complex::new(0.0, d / HBAR) * sum * (h / 3.0);
        assert!(rel(got, want) < 1e-6, "spacing {spacing}: {got} vs {want}");

        if spacing == w800() {
            let area = p.fwhm * (PI / (2.0 * LN_2)).sqrt();
            let exact = Complex::new(0.0, d * p.peak_field() * area / (2.0 * HBAR));
            assert!(rel(got, exact) < 1e-6);
        }
    }
}

#[test]
fn second_order_matches_explicit_path_sum() {
    let w = w800();
    let d = 0.02;
    let mut sys = Levels::two_level(w + 0.3, d);
    sys.energies.push(3.0 * w);
    for row in sys.dipoles.iter_mut() {
        row.push(0.0);
    }
    sys.dipoles.push(vec![0.0, d, 0.0]);
    sys.dipoles[1][2] = d;
    sys.final_indices = vec![2];
    let pw = Pulse::new(OMEGA, 800.0, 1e10, 40.0);
    let ph = Pulse::new(TWO_OMEGA, 400.0, 1e10, 40.0).with_delay(8.0);
    let field = Field::new(vec![pw.clone(), ph.clone()]);
    let ch: ChannelSpec = "omega:1,two_omega:1".parse().unwrap();
    let grid = Grid::covering(&field, 0.01, 4.0).unwrap();
    let got = channel_amplitude(&sys, &field, &ch, &grid).unwrap().value;

    let (w10, w21) = ((w + 0.3) / HBAR, (2.0 * w - 0.3) / HBAR);
    let pulse = |label: &str| if label == OMEGA { &pw } else { &ph };
    let (a, h, n) = (-180.0, 0.001, 360_000);
    let mut want = Complex::new(0.0, 0.0);
    for order in enumerate_orderings(&ch) {
        let (p1, p2) = (pulse(&order[0]), pulse(&order[1]));
        let f1 = |t: f64| Complex::from_polar(1.0, w10 * t) * eplus(p1, t);
        let f2 = |t: f64| Complex::from_polar(1.0, w21 * t) * eplus(p2, t);
        // Cumulative trapezoid for the inner integral, trapezoid outside.
        let mut inner = Complex::new(0.0, 0.0);
        let mut prev_inner_arg = f1(a);
        let mut prev_outer = f2(a) * inner;
        let mut outer = Complex::new(0.0, 0.0);
        for k in 1..=n {
            let t = a + h * k as f64;
            let cur = f1(t);
            inner += (prev_inner_arg + cur) * (0.5 * h);
            prev_inner_arg = cur;
            let o = f2(t) * inner;
            outer += (prev_outer + o) * (0.5 * h);
            prev_outer = o;
        }
        want += outer;
    }
    want *= Complex::new(0.0, d / HBAR) * Complex::new(0.0, d / HBAR);
    assert_eq!(enumerate_orderings(&ch).len(), 2);
    assert!(rel(got, want) < 1e-4, "{got} vs {want}");
}

#[test]
fn rabi_pulse_area() {
    let w = w800();
    let d = 0.1;
    let sys = Levels::two_level(w, d);
    let fwhm = 200.0;
    let e_ref = intensity_to_peak_field(1e10).unwrap();
    for area in [PI / 2.0, PI, 1.5 * PI] {
        let e0 = area * HBAR / (d * fwhm * (PI / (2.0 * LN_2)).sqrt());
        let intensity = 1e10 * (e0 / e_ref).powi(2);
        let f = Field::single(Pulse::new("omega", 800.0, intensity, fwhm));
        let grid = Grid::covering(&f, Grid::default_dt_for(&f, &sys), 3.0).unwrap();
        let p = propagate(&sys, &f, &grid).unwrap().population(1);
        let want = (area / 2.0).sin().powi(2);
        assert!((p - want).abs() <= 0.02 * want, "area {area}: {p} vs {want}");
    }
}

#[test]
fn norm_conserved_at_default_dt() {
    let cfg = ScanConfig::<f64>::polycrystalline(ScanKind::Intensity);
    let desk = Levels::desk_two_level();
    let single = Field::single(Pulse::new("omega", 800.0, 1e11, 100.0));
    for (sys, f) in [(&cfg.system, &cfg.field), (&desk, &single)] {
        let grid = Grid::covering(f, Grid::default_dt_for(f, sys), 3.0).unwrap();
        let prop = propagate_checked(sys, f, &grid, 1e-6).unwrap();
        assert!(prop.max_norm_drift <= 1e-6);
        assert!((prop.state.norm_sqr() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn rk4_error_falls_sixteenfold() {
    let sys = Levels::two_level(3.0 * w800(), 0.1);
    let f = Field::single(Pulse::new("omega", 800.0, 1e12, 30.0));
    let at = |h: f64| {
        let g = Grid::covering(&f, h, 3.0).unwrap();
        propagate_checked(&sys, &f, &g, 1.0).unwrap().state.amplitudes
    };
    let h = f.shortest_period() / 20.0;
    let reference = at(h / 8.0);
    let err = |a: Vec<Complex<f64>>| {
        a.iter().zip(&reference).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    };
    let ratio = err(at(h)) / err(at(h / 2.0));
    assert!((ratio - 16.0).abs() <= 4.0, "ratio {ratio}");
}

#[test]
fn four_photon_ladder_scales_as_fourth_power() {
    // A bare two-level system has no even-order transitions, so the resonant
    // four-step ladder stands in for the four-photon drive.
    let sys = Levels::resonant_ladder(w800(), 4, 0.01);
    let p = |i: f64| {
        let f = Field::single(Pulse::new("omega", 800.0, i, 50.0));
        let grid = Grid::covering(&f, Grid::default_dt_for(&f, &sys), 3.0).unwrap();
        emission_probability(&propagate(&sys, &f, &grid).unwrap(), &sys)
    };
    let ratio = p(1e10) / p(5e9);
    assert!((ratio - 16.0).abs() <= 1.6, "ratio {ratio}");
}

#[test]
fn oracle_gap_shrinks_with_intensity() {
    let sys = Levels::two_level(3.0 * w800(), 0.1);
    let ch: ChannelSpec = "omega:3".parse().unwrap();
    let gaps: Vec<f64> = [1e12, 5e11, 2.5e11]
        .iter()
        .map(|&i| {
            let f = Field::single(Pulse::new("omega", 800.0, i, 30.0));
            let grid = Grid::covering(&f, Grid::default_dt_for(&f, &sys), 3.0).unwrap();
            let a = channel_amplitude(&sys, &f, &ch, &grid).unwrap().probability();
            let b = propagate(&sys, &f, &grid).unwrap().population(1);
            (a - b).abs() / b
        })
        .collect();
    assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1] && gaps[2] < 0.05, "{gaps:?}");
}

#[test]
fn carrier_phase_does_not_matter() {
    let sys = Levels::two_level(3.0 * w800(), 0.1);
    let probs: Vec<f64> = (0..8)
        .map(|k| {
            let p = Pulse::new("omega", 800.0, 5e11, 30.0).with_carrier_phase(k as f64 * PI / 4.0);
            let f = Field::single(p);
            let grid = Grid::covering(&f, Grid::default_dt_for(&f, &sys), 3.0).unwrap();
            propagate(&sys, &f, &grid).unwrap().population(1)
        })
        .collect();
    let lo = probs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = probs.iter().copied().fold(0.0, f64::max);
    assert!((hi - lo) / lo < 0.01, "{probs:?}");
}

#[test]
fn tdse_polarization_law() {
    let sys = Levels::two_level(3.0 * w800(), 0.1);
    let p = |theta: f64| {
        let f = Field::single(Pulse::new("omega", 800.0, 5e11, 30.0).with_polarization(theta));
        let grid = Grid::covering(&f, Grid::default_dt_for(&f, &sys), 3.0).unwrap();
        propagate(&sys, &f, &grid).unwrap().population(1)
    };
    let p0 = p(0.0);
    for theta in [20.0f64, 40.0, 60.0] {
        let want = theta.to_radians().cos().powi(6);
        let got = p(theta) / p0;
        assert!((got - want).abs() <= 0.03 * want, "theta {theta}: {got} vs {want}");
    }
}

#[test]
fn dyson_reproduces_scaling_exponents() {
    let cfg = ScanConfig::<f64>::polycrystalline(ScanKind::Intensity);
    let chans = cfg.channels.list();
    let probs = |s: f64, harmonic_power: i32| -> Vec<f64> {
        let mut f = cfg.field.clone();
        f.get_mut(OMEGA).unwrap().peak_intensity *= s;
        f.get_mut(TWO_OMEGA).unwrap().peak_intensity *= s.powi(harmonic_power);
        let grid = Grid::covering(&f, Grid::default_dt_for(&cfg.field, &cfg.system), cfg.padding_fwhm).unwrap();
        let amps = channel_amplitudes(&cfg.system, &f, &chans, &grid).unwrap();
        let nf = cfg.system.final_indices.len();
        amps.chunks(nf).map(|c| c.iter().map(|a| a.probability()).sum()).collect()
    };
    let base = probs(1.0, 1);
    let doubled = probs(2.0, 1);
    assert!((doubled[0] / base[0] - 16.0).abs() <= 0.08);
    for s in [0.3, 2.0, 3.16] {
        let p = probs(s, 2);
        for (a, b) in p.iter().zip(&base) {
            assert!((a / b / s.powi(4) - 1.0).abs() < 1e-9);
        }
        let a_s = additivity(p[0], p[1], p.iter().sum()).unwrap();
        let a_1 = additivity(base[0], base[1], base.iter().sum()).unwrap();
        assert!((a_s / a_1 - 1.0).abs() < 1e-6);
    }
}

#[test]
fn background_subtraction_is_exact() {
    let cfg = ScanConfig::<f64>::polycrystalline(ScanKind::Intensity);
    let r = run_scan(&cfg).unwrap();
    let bgsub = r.column("p_multicolor_bgsub").unwrap();
    let iw = r.column("i_w_w_cm2").unwrap();
    let ih = r.column("i_2w_w_cm2").unwrap();
    let multi = cfg.channels.multicolor.clone();
    for k in 0..r.rows() {
        let mut f = cfg.field.clone();
        f.get_mut(OMEGA).unwrap().peak_intensity = iw[k];
        f.get_mut(TWO_OMEGA).unwrap().peak_intensity = ih[k];
        let grid = Grid::covering(&f, Grid::default_dt_for(&cfg.field, &cfg.system), cfg.padding_fwhm).unwrap();
        let pm: f64 = channel_amplitudes(&cfg.system, &f, std::slice::from_ref(&multi), &grid)
            .unwrap()
            .iter()
            .map(|a| a.probability())
            .sum();
        assert!((bgsub[k] - pm).abs() <= 1e-12 * pm, "row {k}: {} vs {pm}", bgsub[k]);
    }
}

#[test]
fn multicolor_channel_closes_at_large_delay() {
    let cfg = ScanConfig::<f64>::polycrystalline(ScanKind::Delay);
    let ch = cfg.channels.multicolor.clone();
    let at = |tau: f64| {
        let mut f = cfg.field.clone();
        f.get_mut(OMEGA).unwrap().delay = tau;
        let grid = Grid::covering(&f, Grid::default_dt_for(&cfg.field, &cfg.system), cfg.padding_fwhm).unwrap();
        channel_amplitudes(&cfg.system, &f, std::slice::from_ref(&ch), &grid)
            .unwrap()
            .iter()
            .map(|a| a.probability())
            .sum::<f64>()
    };
    assert!(at(3000.0) < 1e-12 * at(0.0));
}

#[test]
fn additivity_closed_form_from_scaling_probabilities() {
    let (iw, ih, th) = (6.7, 0.22, -64.0);
    let k = [2.0, 30.0, 9.0];
    let chans: Vec<ChannelSpec> =
        ["omega:4", "two_omega:2", "omega:2,two_omega:1"].iter().map(|s| s.parse().unwrap()).collect();
    let probs = |theta: f64| -> Vec<f64> {
        let drives = [ColorDrive::new(OMEGA, iw, theta), ColorDrive::new(TWO_OMEGA, ih, th)];
        chans
            .iter()
            .zip(k)
            .map(|(c, s)| s * scaling_probability(c, &drives).unwrap())
            .collect()
    };
    let p0 = probs(0.0);
    let (c1, c2) = additivity_coefficients(p0[0], p0[1], p0[2]).unwrap();
    for j in 0..37 {
        let theta = -90.0 + 5.0 * j as f64;
        let p = probs(theta);
        let a = additivity(p[0], p[1], p[0] + p[1] + p[2]).unwrap();
        let want = additivity_closed_form(theta, c1, c2);
        assert!((a - want).abs() <= 1e-9 * want.abs().max(1e-3), "theta {theta}");
    }
}

#[test]
fn double_maxima_location() {
    let m = additivity_maxima(1.0f64, 0.25).unwrap();
    assert!((m.theta_deg - 32.765).abs() < 0.01, "{}", m.theta_deg);
    assert!((m.value - 1.0).abs() < 1e-12);
    let best = (0..=90_000)
        .map(|k| k as f64 * 1e-3)
        .max_by(|a, b| {
            additivity_closed_form(*a, 1.0, 0.25).total_cmp(&additivity_closed_form(*b, 1.0, 0.25))
        })
        .unwrap();
    assert!((best - m.theta_deg).abs() < 0.5);
    assert!(additivity_maxima(0.25, 1.0).is_none());
}

#[test]
fn intensity_resolved_visibility() {
    let (ks, km) = (0.7, 1.9);
    let (a1, a2) = visibility_coefficients(ks, km).unwrap();
    for i in [0.2, 1.0, 3.5] {
        for i2 in [0.05f64, 0.8, 2.0] {
            for th in [0.0, 25.0, 50.0] {
                for th2 in [-64.0, 0.0, 30.0] {
                    let c = f64::cos(th * PI / 180.0);
                    let c2 = f64::cos(th2 * PI / 180.0);
                    let fs = ks * i * i * c.powi(4);
                    let fm = km * i * i2.sqrt() * c * c * c2;
                    let v = visibility(fs, fm).unwrap();
                    let w = visibility_from_intensities(i, i2, th, th2, a1, a2).unwrap();
                    assert!((v - w).abs() <= 1e-12 * v, "{i} {i2} {th} {th2}");
                }
            }
        }
    }
}

#[test]
fn scaling_and_dyson_engines_agree() {
    for kind in [ScanKind::Intensity, ScanKind::Polarization] {
        let mut cfg = ScanConfig::<f64>::polycrystalline(kind);
        let dy = run_scan(&cfg).unwrap();
        cfg.engine = Engine::Scaling;
        let sc = run_scan(&cfg).unwrap();
        let names: &[&str] = match kind {
            ScanKind::Intensity => &["slope_fundamental", "slope_harmonic", "slope_multicolor"],
            _ => &["exponent_fundamental", "exponent_multicolor"],
        };
        for n in names {
            let (a, b): (f64, f64) = (dy.derived_value(n).unwrap(), sc.derived_value(n).unwrap());
            assert!((a - b).abs() <= 0.05, "{n}: {a} vs {b}");
        }
    }
}

#[test]
fn additivity_locus_is_flat_in_scan() {
    let mut cfg = ScanConfig::<f64>::polycrystalline(ScanKind::Intensity);
    cfg.locus = Locus::Additivity;
    let r = run_scan(&cfg).unwrap();
    let a = r.column("additivity").unwrap();
    for x in a {
        assert!((x / a[0] - 1.0).abs() < 1e-6);
    }
}

#[test]
fn single_precision_scan() {
    let cfg = ScanConfig::<f32>::polycrystalline(ScanKind::Intensity);
    let r = run_scan(&cfg).unwrap();
    for (n, want) in [("slope_fundamental", 4.0), ("slope_harmonic", 2.0), ("slope_multicolor", 3.0)] {
        let s = r.derived_value(n).unwrap();
        assert!((s - want).abs() <= 0.05, "{n}: {s}");
    }
    assert!((UnitSystem::hbar::<f32>() - 0.658_211_96).abs() < 1e-6);
}
