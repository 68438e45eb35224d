//! Fixed-step time grids and the per-step field/phase sampler shared by both
//! integrators.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levels::LevelSystem;
use crate::pulse::{PulseKernel, TwoColorField};
use crate::scalar::Real;

/// Padding, in units of each pulse's FWHM, that a covering grid keeps on
/// either side of the pulse center.
pub const DEFAULT_PADDING_FWHM: f64 = 3.0;

/// Samples per optical period of the shortest wavelength.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub t_start: T,
    pub t_end: T,
    pub dt: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(t_start: T, t_end: T, dt: T) -> Result<Self> {
        let g = TimeGrid { t_start, t_end, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_start < self.t_end) {
            return Err(Error::domain("time grid needs t_start < t_end"));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::domain("time grid needs dt > 0"));
        }
        Ok(())
    }

    /// Default step: shortest optical period / 40.
    pub fn default_dt(field: &TwoColorField<T>) -> T {
        field.shortest_period() / T::lit(DEFAULT_STEPS_PER_PERIOD)
    }

    /// Default step for propagating `system`: the shortest of the optical
    /// periods and the coupled-transition periods, over 40. Equals
    /// [`default_dt`](Self::default_dt) unless a coupled level gap exceeds the
    /// largest photon energy.
    pub fn default_dt_for(field: &TwoColorField<T>, system: &LevelSystem<T>) -> T {
        let w = system.angular_energies();
        let fastest = system
            .couplings()
            .iter()
            .map(|&(m, n, _)| (w[m] - w[n]).abs())
            .fold(T::zero(), T::max);
        let mut period = field.shortest_period();
        if fastest > T::zero() {
            period = period.min(T::TAU() / fastest);
        }
        period / T::lit(DEFAULT_STEPS_PER_PERIOD)
    }

    /// Grid spanning `padding` FWHMs around every pulse center.
    pub fn covering(field: &TwoColorField<T>, dt: T, padding: T) -> Result<Self> {
        let (lo, hi) = Self::pulse_extent(field, padding)?;
        Self::new(lo, hi, dt)
    }

    /// Covering grid for a family of fields (e.g. all points of a delay scan).
    pub fn covering_all<'a, I>(fields: I, dt: T, padding: T) -> Result<Self>
    where
        I: IntoIterator<Item = &'a TwoColorField<T>>,
    {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for f in fields {
            let (a, b) = Self::pulse_extent(f, padding)?;
            lo = lo.min(a);
            hi = hi.max(b);
        }
        Self::new(lo, hi, dt)
    }

    fn pulse_extent(field: &TwoColorField<T>, padding: T) -> Result<(T, T)> {
        if field.pulses.is_empty() {
            return Err(Error::domain("cannot cover an empty field"));
        }
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for p in &field.pulses {
            lo = lo.min(p.delay - padding * p.fwhm);
            hi = hi.max(p.delay + padding * p.fwhm);
        }
        Ok((lo, hi))
    }

    /// Whether each pulse has at least `padding` FWHMs of grid on both sides.
    pub fn covers(&self, field: &TwoColorField<T>, padding: T) -> bool {
        let slack = self.dt;
        field.pulses.iter().all(|p| {
            self.t_start <= p.delay - padding * p.fwhm + slack
                && self.t_end >= p.delay + padding * p.fwhm - slack
        })
    }

    pub fn steps(&self) -> usize {
        let span = (self.t_end - self.t_start) / self.dt;
        let n = (span - T::lit(1e-9)).ceil().to_usize().unwrap_or(1);
        n.max(1)
    }

    /// Step actually taken so that the last step lands on `t_end`.
    pub fn effective_dt(&self) -> T {
        (self.t_end - self.t_start) / T::from_usize_lossy(self.steps())
    }

    /// Same span with the step divided by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        TimeGrid {
            dt: self.effective_dt() / T::from_usize_lossy(factor),
            ..*self
        }
    }
}

/// Quantities needed at the three RK4 abscissae `t`, `t + h/2`, `t + h`.
pub(crate) struct StepSamples<T> {
    /// `exp(i E_m t / ħ)` per level, per abscissa.
    pub phases: [Vec<Complex<T>>; 3],
    /// Photon-absorption field component `E⁺_c` per pulse, per abscissa.
    pub eplus: [Vec<Complex<T>>; 3],
}

pub(crate) struct StepSampler<T> {
    level_omegas: Vec<T>,
    level_half: Vec<Complex<T>>,
    kernels: Vec<PulseKernel<T>>,
    carrier_half: Vec<Complex<T>>,
    h: T,
    pub samples: StepSamples<T>,
}

impl<T: Real> StepSampler<T> {
    pub fn new(level_omegas: Vec<T>, field: &TwoColorField<T>, h: T) -> Self {
        let half = h * T::lit(0.5);
        let level_half = level_omegas
            .iter()
            .map(|&w| Complex::from_polar(T::one(), w * half))
            .collect();
        let kernels: Vec<_> = field.pulses.iter().map(PulseKernel::new).collect();
        let carrier_half = kernels
            .iter()
            .map(|k| Complex::from_polar(T::one(), -k.omega * half))
            .collect();
        let n = level_omegas.len();
        let c = kernels.len();
        let zeros = |len| vec![Complex::new(T::zero(), T::zero()); len];
        StepSampler {
            level_omegas,
            level_half,
            kernels,
            carrier_half,
            h,
            samples: StepSamples {
                phases: [zeros(n), zeros(n), zeros(n)],
                eplus: [zeros(c), zeros(c), zeros(c)],
            },
        }
    }

    pub fn colors(&self) -> usize {
        self.kernels.len()
    }

    /// Fills `samples` for the step starting at `t`.
    pub fn sample(&mut self, t: T) {
        let half = self.h * T::lit(0.5);
        let s = &mut self.samples;
        for (m, &w) in self.level_omegas.iter().enumerate() {
            let p0 = Complex::from_polar(T::one(), w * t);
            let p1 = p0 * self.level_half[m];
            let p2 = p1 * self.level_half[m];
            s.phases[0][m] = p0;
            s.phases[1][m] = p1;
            s.phases[2][m] = p2;
        }
        let times = [t, t + half, t + self.h];
        for (c, k) in self.kernels.iter().enumerate() {
            let r0 = Complex::from_polar(T::one(), -k.omega * t) * k.offset;
            let r1 = r0 * self.carrier_half[c];
            let r2 = r1 * self.carrier_half[c];
            let rot = [r0, r1, r2];
            for j in 0..3 {
                s.eplus[j][c] = rot[j] * k.envelope_amplitude(times[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::{projected_field_at, PulseSpec};

    #[test]
    fn covering_grid_has_padding() {
        let field = TwoColorField::new(vec![
            PulseSpec::new("omega", 800.0, 1e11, 100.0).with_delay(-50.0),
            PulseSpec::new("two_omega", 400.0, 1e10, 400.0),
        ]);
        let g = TimeGrid::covering(&field, 0.05, 3.0).unwrap();
        assert_eq!(g.t_start, -1200.0);
        assert_eq!(g.t_end, 1200.0);
        assert!(g.covers(&field, 3.0));
        assert!(!g.covers(&field.shifted(500.0), 3.0));
        let span = g.effective_dt() * g.steps() as f64;
        assert!((span - 2400.0).abs() < 1e-9);
    }

    #[test]
    fn default_dt_uses_shortest_period() {
        let field = TwoColorField::new(vec![
            PulseSpec::new("omega", 800.0, 1e11, 100.0),
            PulseSpec::new("two_omega", 400.0, 1e10, 400.0),
        ]);
        let dt: f64 = TimeGrid::default_dt(&field);
        assert!((dt - 400.0 / 299.792458 / 40.0).abs() < 1e-12);
    }

    #[test]
    fn default_dt_resolves_wide_gaps() {
        let field = TwoColorField::single(PulseSpec::new("omega", 800.0, 1e11, 100.0));
        let narrow = LevelSystem::two_level(1.0, 0.1);
        let wide = LevelSystem::two_level(4.0, 0.1);
        let dt: f64 = TimeGrid::default_dt(&field);
        assert_eq!(TimeGrid::default_dt_for(&field, &narrow), dt);
        let want = std::f64::consts::TAU * 0.6582119569 / 4.0 / 40.0;
        assert!((TimeGrid::default_dt_for(&field, &wide) - want).abs() < 1e-12);
    }

    #[test]
    fn invalid_grids() {
        assert!(TimeGrid::new(1.0, 0.0, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn sampler_reproduces_field() {
        let p = PulseSpec::new("omega", 800.0, 3e11, 60.0)
            .with_delay(4.0)
            .with_carrier_phase(1.1)
            .with_polarization(20.0);
        let field = TwoColorField::single(p.clone());
        let h = 0.07;
        let mut s = StepSampler::new(vec![0.0, 2.0], &field, h);
        for k in -30..30 {
            let t = k as f64 * 2.3;
            s.sample(t);
            for (j, tt) in [t, t + h / 2.0, t + h].into_iter().enumerate() {
                let e = 2.0 * s.samples.eplus[j][0].re;
                assert!((e - projected_field_at(&p, tt)).abs() < 1e-12);
                let ph = s.samples.phases[j][1];
                assert!((ph - Complex::from_polar(1.0, 2.0 * tt)).norm() < 1e-12);
            }
        }
    }
}
