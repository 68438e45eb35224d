//! Closed-form scaling laws, additivity, overlap and fringe formulas.

use serde::{Deserialize, Serialize};

use super::channel::ChannelSpec;
use crate::error::{Error, Result};
use crate::pulse::PulseSpec;
use crate::scalar::Real;

/// Intensity and polarization of one color as seen by the scaling laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorDrive<T> {
    pub label: String,
    /// Any consistent intensity unit; results are relative.
    pub intensity: T,
    /// Degrees relative to the tip axis.
    pub angle_deg: T,
}

impl<T: Real> ColorDrive<T> {
    pub fn new(label: impl Into<String>, intensity: T, angle_deg: T) -> Self {
        ColorDrive { label: label.into(), intensity, angle_deg }
    }

    pub fn from_pulse(p: &PulseSpec<T>) -> Self {
        Self::new(p.label.clone(), p.peak_intensity, p.polarization_angle)
    }

    /// `I cos²θ`, the per-photon factor of the scaling laws.
    pub fn projected_intensity(&self) -> T {
        let c = self.angle_deg.to_radians().cos();
        self.intensity * c * c
    }
}

/// `∏_c I_c^{n_c} cos^{2 n_c} θ_c` for the channel's photon multiset.
pub fn scaling_probability<T: Real>(channel: &ChannelSpec, drives: &[ColorDrive<T>]) -> Result<T> {
    let mut p = T::one();
    for (label, &n) in channel.counts() {
        let d = drives
            .iter()
            .find(|d| &d.label == label)
            .ok_or_else(|| Error::config(format!("no drive for color `{label}`")))?;
        if !(d.intensity >= T::zero()) {
            return Err(Error::domain("intensity >= 0 violated"));
        }
        p *= d.projected_intensity().powi(n as i32);
    }
    Ok(p)
}

/// `(p_total − p_w − p_2w) / (p_w + p_2w)`.
pub fn additivity<T: Real>(p_w: T, p_2w: T, p_total: T) -> Result<T> {
    let base = p_w + p_2w;
    if !(base > T::zero()) {
        return Err(Error::domain("additivity needs p_w + p_2w > 0"));
    }
    Ok((p_total - base) / base)
}

/// `cos⁴θ / (c₁ cos⁸θ + c₂)`.
pub fn additivity_closed_form<T: Real>(theta_deg: T, c1: T, c2: T) -> T {
    let u = theta_deg.to_radians().cos().powi(2);
    u * u / (c1 * u.powi(4) + c2)
}

/// Additivity coefficients from the three channel probabilities at `θ_ω = 0`
/// with the harmonic angle held fixed: `c₁ = P_ω(0)/P_m(0)`, `c₂ = P_2ω/P_m(0)`.
pub fn additivity_coefficients<T: Real>(p_w0: T, p_2w: T, p_multi0: T) -> Result<(T, T)> {
    if !(p_multi0 > T::zero()) {
        return Err(Error::domain("multicolor probability must be positive"));
    }
    Ok((p_w0 / p_multi0, p_2w / p_multi0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditivityMaximum<T> {
    /// `cos²θ` at the maximum.
    pub cos_sq: T,
    /// Positive angle of the symmetric pair, degrees.
    pub theta_deg: T,
    pub value: T,
}

/// Off-axis maxima of the closed-form additivity. `None` unless `c₂ < c₁`,
/// in which case the curve peaks at `θ = 0` only.
pub fn additivity_maxima<T: Real>(c1: T, c2: T) -> Option<AdditivityMaximum<T>> {
    if !(c1 > T::zero() && c2 > T::zero() && c2 < c1) {
        return None;
    }
    let cos_sq = (c2 / c1).powf(T::lit(0.25));
    let theta_deg = cos_sq.sqrt().acos().to_degrees();
    let value = T::one() / (T::lit(2.0) * (c1 * c2).sqrt());
    Some(AdditivityMaximum { cos_sq, theta_deg, value })
}

/// Normalized overlap `g(τ)` controlling the multicolor delay dependence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Overlap<T> {
    /// `g ≡ 1`.
    Unity,
    /// `exp(−4 ln2 τ²/w²)` with FWHM `w`.
    Gaussian { fwhm: T },
    /// Quadrature of `∫ a_s(t−τ)² a_h(t) dt` over the two amplitude
    /// envelopes, normalized at `τ = 0`.
    Envelopes { single_fwhm: T, harmonic_fwhm: T },
}

impl<T: Real> Overlap<T> {
    /// Gaussian overlap of a two-photon `single` color with a one-photon
    /// `harmonic` color, for Gaussian intensity FWHMs.
    pub fn gaussian_for(single_fwhm: T, harmonic_fwhm: T) -> Self {
        let two = T::lit(2.0);
        Overlap::Gaussian {
            fwhm: (single_fwhm * single_fwhm + two * harmonic_fwhm * harmonic_fwhm).sqrt(),
        }
    }

    pub fn at(&self, tau: T) -> T {
        match self {
            Overlap::Unity => T::one(),
            Overlap::Gaussian { fwhm } => {
                let x = tau / *fwhm;
                (-T::lit(4.0) * T::LN_2() * x * x).exp()
            }
            Overlap::Envelopes { single_fwhm, harmonic_fwhm } => {
                let raw = |tau: T| envelope_overlap_raw(*single_fwhm, *harmonic_fwhm, tau);
                raw(tau) / raw(T::zero())
            }
        }
    }

    /// FWHM of `g²`, i.e. of the multicolor probability peak (Gaussian forms).
    pub fn probability_fwhm(&self) -> Option<T> {
        match self {
            Overlap::Unity => None,
            Overlap::Gaussian { fwhm } => Some(*fwhm / T::lit(2.0).sqrt()),
            Overlap::Envelopes { single_fwhm, harmonic_fwhm } => {
                match Self::gaussian_for(*single_fwhm, *harmonic_fwhm) {
                    Overlap::Gaussian { fwhm } => Some(fwhm / T::lit(2.0).sqrt()),
                    _ => None,
                }
            }
        }
    }
}

fn envelope_overlap_raw<T: Real>(single_fwhm: T, harmonic_fwhm: T, tau: T) -> T {
    let a = |t: T, w: T| {
        let x = t / w;
        (-T::lit(2.0) * T::LN_2() * x * x).exp()
    };
    let span = T::lit(6.0) * single_fwhm.max(harmonic_fwhm);
    let lo = tau.min(T::zero()) - span;
    let hi = tau.max(T::zero()) + span;
    let n = 4000usize;
    let h = (hi - lo) / T::from_usize_lossy(n);
    let f = |t: T| {
        let s = a(t - tau, single_fwhm);
        s * s * a(t, harmonic_fwhm)
    };
    // Simpson.
    let mut acc = f(lo) + f(hi);
    for k in 1..n {
        let w = if k % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        acc += w * f(lo + h * T::from_usize_lossy(k));
    }
    acc * h / T::lit(3.0)
}

/// Parameters of the two-channel interference model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeParams<T> {
    pub f_single: T,
    pub f_multi: T,
    pub overlap: Overlap<T>,
    /// Single-color carrier angular frequency ν in rad/fs.
    pub angular_frequency: T,
}

impl<T: Real> FringeParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.f_single >= T::zero() && self.f_multi >= T::zero()) {
            return Err(Error::domain("fringe amplitudes must be >= 0"));
        }
        if !(self.angular_frequency > T::zero()) {
            return Err(Error::domain("angular_frequency > 0 violated"));
        }
        Ok(())
    }

    /// Fringe minimum `(f_s − f_m g(τ))²` reached where `cos(2ντ) = −1`.
    pub fn envelope_minimum(&self, tau: T) -> T {
        let d = self.f_single - self.f_multi * self.overlap.at(tau);
        d * d
    }
}

/// `f_s² + f_m² g² + 2 cos(2ντ) f_s f_m g`.
pub fn fringe_pattern<T: Real>(params: &FringeParams<T>, tau: T) -> T {
    let g = params.overlap.at(tau);
    let (a, b) = (params.f_single, params.f_multi * g);
    let c = (T::lit(2.0) * params.angular_frequency * tau).cos();
    a * a + b * b + T::lit(2.0) * c * a * b
}

/// Fringe period `2π/(2ν)` in fs.
pub fn fringe_period<T: Real>(angular_frequency: T) -> T {
    T::PI() / angular_frequency
}

/// `2ab/(a² + b²)`.
pub fn visibility<T: Real>(f_single: T, f_multi: T) -> Result<T> {
    let den = f_single * f_single + f_multi * f_multi;
    if !(den > T::zero()) {
        return Err(Error::domain("visibility needs f_single² + f_multi² > 0"));
    }
    Ok(T::lit(2.0) * f_single * f_multi / den)
}

/// `a₁, a₂` of the intensity-resolved visibility for amplitude strengths
/// `f_s = k_s I_ν² cos⁴θ_ν` and `f_m = k_m I_ν √I_2ν cos²θ_ν cosθ_2ν`.
pub fn visibility_coefficients<T: Real>(k_single: T, k_multi: T) -> Result<(T, T)> {
    if !(k_single > T::zero() && k_multi > T::zero()) {
        return Err(Error::domain("visibility strengths must be positive"));
    }
    let two = T::lit(2.0);
    Ok((k_single / (two * k_multi), k_multi / (two * k_single)))
}

/// Intensity-resolved visibility
/// `I³√I₂ cos⁶θ cosθ₂ / (a₁ I⁴ cos⁸θ + a₂ I² I₂ cos⁴θ cos²θ₂)`.
pub fn visibility_from_intensities<T: Real>(
    i_single: T,
    i_harmonic: T,
    theta_single_deg: T,
    theta_harmonic_deg: T,
    a1: T,
    a2: T,
) -> Result<T> {
    let c = theta_single_deg.to_radians().cos();
    let c2 = theta_harmonic_deg.to_radians().cos();
    let num = i_single.powi(3) * i_harmonic.sqrt() * c.powi(6) * c2;
    let den = a1 * i_single.powi(4) * c.powi(8)
        + a2 * i_single * i_single * i_harmonic * c.powi(4) * c2 * c2;
    if !(den > T::zero()) {
        return Err(Error::domain("visibility denominator vanishes"));
    }
    Ok(num / den)
}
