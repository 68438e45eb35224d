//! Fits and spectral estimates used by the campaigns.
//!
//! Power laws are fitted by unweighted least squares in log space. The
//! polarization fit drops points with `cos θ < 0.1`.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Points with `cos θ` below this are excluded from exponent fits.
pub const COS_CUTOFF: f64 = 0.1;

/// Minimum point count for any fit.
pub const MIN_FIT_POINTS: usize = 5;

/// Spectral peak to median-floor power ratio below which no fringe is reported.
pub const MIN_PROMINENCE: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit<T> {
    pub slope: T,
    pub intercept: T,
    /// `max |y_fit / y − 1|` over the fitted points.
    pub max_relative_residual: T,
    pub points: usize,
}

/// Straight line through `(ln x, ln y)`.
pub fn fit_loglog_slope<T: Real>(xs: &[T], ys: &[T]) -> Result<LineFit<T>> {
    if xs.len() != ys.len() {
        return Err(Error::domain("x and y lengths differ"));
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::domain(format!("need at least {MIN_FIT_POINTS} points")));
    }
    if xs.iter().chain(ys).any(|v| !(*v > T::zero()) || !v.is_finite()) {
        return Err(Error::domain("log-log fit needs strictly positive finite values"));
    }
    let lx: Vec<T> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<T> = ys.iter().map(|y| y.ln()).collect();
    let (slope, intercept) = line(&lx, &ly)?;
    let max_relative_residual = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| ((intercept + slope * x - y).exp() - T::one()).abs())
        .fold(T::zero(), T::max);
    Ok(LineFit { slope, intercept, max_relative_residual, points: xs.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosFit<T> {
    /// Fitted `2n` in `y₀ cos^{2n} θ`.
    pub exponent: T,
    pub prefactor: T,
    pub max_relative_residual: T,
    pub points: usize,
}

/// Fit `y = y₀ cos^{2n}(θ)` on `ln y` vs `ln cos θ`, returning `2n`.
pub fn fit_cos_exponent<T: Real>(angles_deg: &[T], ys: &[T]) -> Result<CosFit<T>> {
    if angles_deg.len() != ys.len() {
        return Err(Error::domain("angle and value lengths differ"));
    }
    let cut = T::lit(COS_CUTOFF);
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&a, &y) in angles_deg.iter().zip(ys) {
        if !(a.abs() < T::lit(90.0)) {
            continue;
        }
        let c = a.to_radians().cos();
        if c < cut || !(y > T::zero()) {
            continue;
        }
        lx.push(c.ln());
        ly.push(y.ln());
    }
    if lx.len() < MIN_FIT_POINTS {
        return Err(Error::domain("too few usable points for a cos-exponent fit"));
    }
    let (slope, intercept) = line(&lx, &ly)?;
    let max_relative_residual = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| ((intercept + slope * x - y).exp() - T::one()).abs())
        .fold(T::zero(), T::max);
    Ok(CosFit {
        exponent: slope,
        prefactor: intercept.exp(),
        max_relative_residual,
        points: lx.len(),
    })
}

fn line<T: Real>(x: &[T], y: &[T]) -> Result<(T, T)> {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
    }
    if !(sxx > T::zero()) {
        return Err(Error::domain("fit abscissae are all equal"));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Solves the least-squares problem `min ‖A c − y‖` by normal equations with
/// partial pivoting. `rows` holds the design matrix row by row.
pub fn least_squares<T: Real>(rows: &[Vec<T>], y: &[T]) -> Result<Vec<T>> {
    let k = rows.first().map(Vec::len).unwrap_or(0);
    if k == 0 || rows.len() < k || rows.len() != y.len() {
        return Err(Error::domain("least-squares system is underdetermined"));
    }
    let mut m = vec![vec![T::zero(); k + 1]; k];
    for (row, &yi) in rows.iter().zip(y) {
        for i in 0..k {
            for j in 0..k {
                m[i][j] += row[i] * row[j];
            }
            m[i][k] += row[i] * yi;
        }
    }
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap())
            .unwrap();
        if !(m[piv][col].abs() > T::zero()) {
            return Err(Error::domain("singular least-squares system"));
        }
        m.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=k {
                    let v = m[col][c];
                    m[r][c] -= f * v;
                }
            }
        }
    }
    Ok((0..k).map(|i| m[i][k] / m[i][i]).collect())
}

/// Local model `Σ_j b_j s^j + A cos(ω t) + B sin(ω t)` with `s` the
/// centered, scaled abscissa.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit<T> {
    /// Baseline polynomial coefficients in the scaled abscissa.
    pub baseline: Vec<T>,
    pub cos_coef: T,
    pub sin_coef: T,
    pub rss: T,
    pub center: T,
    pub scale: T,
}

impl<T: Real> SinusoidFit<T> {
    pub fn amplitude(&self) -> T {
        self.cos_coef.hypot(self.sin_coef)
    }

    /// Baseline value at the window center.
    pub fn offset(&self) -> T {
        self.baseline.first().copied().unwrap_or_else(T::zero)
    }

    /// Fringe contrast `amplitude / offset` at the window center.
    pub fn visibility(&self) -> T {
        self.amplitude() / self.offset()
    }
}

/// Sinusoid at fixed angular frequency `omega` plus a polynomial baseline.
pub fn fit_sinusoid<T: Real>(ts: &[T], ys: &[T], omega: T, baseline_degree: usize) -> Result<SinusoidFit<T>> {
    if ts.len() != ys.len() || ts.len() < baseline_degree + 3 {
        return Err(Error::domain("too few samples for a sinusoid fit"));
    }
    let lo = ts.iter().copied().fold(T::infinity(), T::min);
    let hi = ts.iter().copied().fold(T::neg_infinity(), T::max);
    let center = (lo + hi) * T::lit(0.5);
    let scale = ((hi - lo) * T::lit(0.5)).max(T::min_positive_value());
    let design = |t: T| {
        let s = (t - center) / scale;
        let mut row: Vec<T> = (0..=baseline_degree).map(|j| s.powi(j as i32)).collect();
        let ph = omega * t;
        row.push(ph.cos());
        row.push(ph.sin());
        row
    };
    let rows: Vec<Vec<T>> = ts.iter().map(|&t| design(t)).collect();
    let c = least_squares(&rows, ys)?;
    let rss = rows
        .iter()
        .zip(ys)
        .map(|(r, &y)| {
            let f: T = r.iter().zip(&c).map(|(&a, &b)| a * b).sum();
            (f - y) * (f - y)
        })
        .sum();
    let nb = baseline_degree + 1;
    Ok(SinusoidFit {
        baseline: c[..nb].to_vec(),
        cos_coef: c[nb],
        sin_coef: c[nb + 1],
        rss,
        center,
        scale,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FringeEstimate<T> {
    Detected {
        period: T,
        /// Spectral peak power over the median spectral power.
        prominence: T,
        /// Fitted sinusoid amplitude.
        amplitude: T,
    },
    NoFringeDetected { prominence: T },
}

impl<T: Real> FringeEstimate<T> {
    pub fn period(&self) -> Option<T> {
        match self {
            FringeEstimate::Detected { period, .. } => Some(*period),
            FringeEstimate::NoFringeDetected { .. } => None,
        }
    }

    pub fn prominence(&self) -> T {
        match self {
            FringeEstimate::Detected { prominence, .. } => *prominence,
            FringeEstimate::NoFringeDetected { prominence } => *prominence,
        }
    }
}

/// Dominant oscillation period of uniformly sampled data: quadratic detrend,
/// zero-padded FFT peak, then a golden-section least-squares refinement of
/// the frequency.
pub fn extract_fringe_period<T: Real>(ts: &[T], ys: &[T]) -> Result<FringeEstimate<T>> {
    let n = ts.len();
    if n != ys.len() || n < 16 {
        return Err(Error::domain("fringe extraction needs at least 16 samples"));
    }
    let dt = (ts[n - 1] - ts[0]) / T::from_usize_lossy(n - 1);
    if !(dt > T::zero()) {
        return Err(Error::domain("sample times must increase"));
    }
    for (k, &t) in ts.iter().enumerate() {
        let expect = ts[0] + dt * T::from_usize_lossy(k);
        if (t - expect).abs() > dt * T::lit(1e-6) {
            return Err(Error::domain("fringe extraction needs uniform sampling"));
        }
    }

    // Quadratic detrend.
    let trend = fit_polynomial(ts, ys, 2)?;
    let resid: Vec<T> = ts.iter().zip(ys).map(|(&t, &y)| y - trend(t)).collect();
    let scale = ys.iter().map(|y| y.abs()).fold(T::zero(), T::max);
    let rms = (resid.iter().map(|r| *r * *r).sum::<T>() / T::from_usize_lossy(n)).sqrt();
    let floor = T::lit(1e3) * T::epsilon() * scale.max(T::min_positive_value());
    if !(rms > floor) {
        return Ok(FringeEstimate::NoFringeDetected { prominence: T::zero() });
    }

    let len = (8 * n).next_power_of_two();
    // Hann window keeps rectangular-window sidelobes out of the peak search.
    let last = T::from_usize_lossy(n - 1);
    let mut buf: Vec<Complex<T>> = resid
        .iter()
        .enumerate()
        .map(|(k, &r)| {
            let w = T::lit(0.5) - T::lit(0.5) * (T::TAU() * T::from_usize_lossy(k) / last).cos();
            Complex::new(r * w, T::zero())
        })
        .collect();
    buf.resize(len, Complex::new(T::zero(), T::zero()));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let power: Vec<T> = buf[..len / 2].iter().map(|c| c.norm_sqr()).collect();
    // Skip the lowest bins, which carry leftover trend: a fringe needs at
    // least three periods in the window.
    let start = (len / n).max(1) * 3;
    let (kmax, pmax) = power
        .iter()
        .enumerate()
        .skip(start)
        .fold((start, T::zero()), |acc, (k, &p)| if p > acc.1 { (k, p) } else { acc });
    let mut sorted: Vec<T> = power[start..].to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2].max(T::min_positive_value());
    let prominence = pmax / median;
    // A maximum on the skip edge is a falling spectrum, not a peak.
    let edge = kmax == start || !(power[kmax - 1] < pmax);
    if edge || !(prominence > T::lit(MIN_PROMINENCE)) || kmax + 1 >= power.len() {
        return Ok(FringeEstimate::NoFringeDetected { prominence });
    }

    let df = T::one() / (dt * T::from_usize_lossy(len));
    let f0 = df * T::from_usize_lossy(kmax);
    let rss_at = |f: T| -> T {
        fit_sinusoid(ts, ys, T::TAU() * f, 2)
            .map(|fit| fit.rss)
            .unwrap_or_else(|_| T::infinity())
    };
    let f = golden_min(rss_at, f0 - df, f0 + df, T::lit(1e-12) * f0);
    let fit = fit_sinusoid(ts, ys, T::TAU() * f, 2)?;
    Ok(FringeEstimate::Detected { period: T::one() / f, prominence, amplitude: fit.amplitude() })
}

fn fit_polynomial<T: Real>(ts: &[T], ys: &[T], degree: usize) -> Result<impl Fn(T) -> T> {
    let lo = ts.iter().copied().fold(T::infinity(), T::min);
    let hi = ts.iter().copied().fold(T::neg_infinity(), T::max);
    let center = (lo + hi) * T::lit(0.5);
    let scale = ((hi - lo) * T::lit(0.5)).max(T::min_positive_value());
    let rows: Vec<Vec<T>> = ts
        .iter()
        .map(|&t| {
            let s = (t - center) / scale;
            (0..=degree).map(|j| s.powi(j as i32)).collect()
        })
        .collect();
    let c = least_squares(&rows, ys)?;
    Ok(move |t: T| {
        let s = (t - center) / scale;
        c.iter().rev().fold(T::zero(), |acc, &b| acc * s + b)
    })
}

fn golden_min<T: Real, F: Fn(T) -> T>(f: F, mut a: T, mut b: T, tol: T) -> T {
    let r = T::lit(0.618_033_988_749_894_8);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    (a + b) * T::lit(0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakStats<T> {
    /// Midpoint of the two half-maximum crossings.
    pub center: T,
    pub height: T,
    pub fwhm: T,
}

/// Height and half-maximum width of a single-peaked curve, with linear
/// interpolation between samples.
pub fn peak_stats<T: Real>(xs: &[T], ys: &[T]) -> Result<PeakStats<T>> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::domain("peak characterization needs at least 3 samples"));
    }
    let (imax, height) = ys
        .iter()
        .copied()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (i, y)| if y > acc.1 { (i, y) } else { acc });
    if !(height > T::zero()) {
        return Err(Error::domain("no positive peak"));
    }
    let half = height * T::lit(0.5);
    let cross = |i: usize, j: usize| xs[i] + (half - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i]);
    let left = (1..=imax).rev().find(|&i| ys[i - 1] < half).map(|i| cross(i - 1, i));
    let right = (imax..xs.len() - 1).find(|&i| ys[i + 1] < half).map(|i| cross(i, i + 1));
    match (left, right) {
        (Some(l), Some(r)) => Ok(PeakStats { center: (l + r) * T::lit(0.5), height, fwhm: r - l }),
        _ => Err(Error::domain("peak does not fall below half maximum inside the scan")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_power_law() {
        let xs: Vec<f64> = (0..9).map(|k| 10f64.powf(k as f64 / 8.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powi(4)).collect();
        let fit = fit_loglog_slope(&xs, &ys).unwrap();
        assert!((fit.slope - 4.0).abs() < 1e-12);
        assert!(fit.max_relative_residual < 1e-10);
        let flat = vec![2.5; 9];
        assert!(fit_loglog_slope(&xs, &flat).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn noisy_square_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(20_240_917);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let xs: Vec<f64> = (0..19).map(|k| 10f64.powf(k as f64 / 9.0)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x * (1.0 + noise.sample(&mut rng))).collect();
        let fit = fit_loglog_slope(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn rejects_bad_points() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(fit_loglog_slope(&xs, &[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
        assert!(fit_loglog_slope(&xs[..4], &[1.0; 4]).is_err());
    }

    #[test]
    fn cos_exponents() {
        let th: Vec<f64> = (-18..=18).map(|k| 5.0 * k as f64).collect();
        for n in [8, 4] {
            let ys: Vec<f64> = th.iter().map(|t| 2.0 * t.to_radians().cos().powi(n)).collect();
            let fit = fit_cos_exponent(&th, &ys).unwrap();
            assert!((fit.exponent - n as f64).abs() < 1e-9);
            assert!((fit.prefactor - 2.0).abs() < 1e-9);
        }
        assert!(fit_cos_exponent(&[85.0, 88.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn fringe_period_of_pure_cosine() {
        let ts: Vec<f64> = (0..400).map(|k| k as f64 * 2.6 / 16.0).collect();
        let ys: Vec<f64> = ts.iter().map(|t| (std::f64::consts::TAU * t / 2.6).cos()).collect();
        let est = extract_fringe_period(&ts, &ys).unwrap();
        assert!((est.period().unwrap() - 2.6).abs() < 5e-3);
    }

    #[test]
    fn flat_signal_has_no_fringe() {
        let ts: Vec<f64> = (0..200).map(|k| k as f64 * 0.1).collect();
        let ys = vec![3.0; 200];
        let est = extract_fringe_period(&ts, &ys).unwrap();
        assert!(est.period().is_none());
        let smooth: Vec<f64> = ts.iter().map(|t| (-(t - 10.0).powi(2) / 400.0).exp()).collect();
        assert!(extract_fringe_period(&ts, &smooth).unwrap().period().is_none());
    }

    #[test]
    fn gaussian_peak_width() {
        let xs: Vec<f64> = (-100..=100).map(|k| k as f64 * 10.0).collect();
        let w = 406.0;
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| (-4.0 * std::f64::consts::LN_2 * ((x - 20.0) / w).powi(2)).exp())
            .collect();
        let p = peak_stats(&xs, &ys).unwrap();
        assert!((p.fwhm - w).abs() / w < 5e-3);
        assert!((p.center - 20.0).abs() < 1.0);
    }

    #[test]
    fn sinusoid_fit_recovers_contrast() {
        let om = 2.0;
        let ts: Vec<f64> = (0..100).map(|k| k as f64 * 0.05).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 + 0.5 * (om * t + 0.3).cos()).collect();
        let fit = fit_sinusoid(&ts, &ys, om, 0).unwrap();
        assert!((fit.visibility() - 0.25).abs() < 1e-10);
    }
}
