//! Gaussian two-color pulse synthesis, projected onto the tip axis.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::{angular_frequency, intensity_to_peak_field};

/// One colored pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec<T> {
    /// Color label used by channel specifications (`omega`, `two_omega`, `nu`, ...).
    pub label: String,
    /// Vacuum wavelength in nm.
    pub wavelength: T,
    /// Peak (effective, enhancement included) intensity in W/cm².
    pub peak_intensity: T,
    /// Intensity-envelope FWHM in fs.
    pub fwhm: T,
    /// Arrival delay in fs, positive is later.
    pub delay: T,
    /// Carrier phase in rad, referenced to the envelope center.
    pub carrier_phase: T,
    /// Polarization angle in degrees relative to the tip axis.
    pub polarization_angle: T,
}

impl<T: Real> PulseSpec<T> {
    pub fn new(label: impl Into<String>, wavelength: T, peak_intensity: T, fwhm: T) -> Self {
        PulseSpec {
            label: label.into(),
            wavelength,
            peak_intensity,
            fwhm,
            delay: T::zero(),
            carrier_phase: T::zero(),
            polarization_angle: T::zero(),
        }
    }

    pub fn with_delay(mut self, delay: T) -> Self {
        self.delay = delay;
        self
    }

    pub fn with_polarization(mut self, degrees: T) -> Self {
        self.polarization_angle = degrees;
        self
    }

    pub fn with_carrier_phase(mut self, phase: T) -> Self {
        self.carrier_phase = phase;
        self
    }

    pub fn with_intensity(mut self, intensity: T) -> Self {
        self.peak_intensity = intensity;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength > T::zero()) {
            return Err(Error::domain(format!("pulse `{}`: wavelength > 0 violated", self.label)));
        }
        if !(self.fwhm > T::zero()) {
            return Err(Error::domain(format!("pulse `{}`: fwhm > 0 violated", self.label)));
        }
        if !(self.peak_intensity >= T::zero()) {
            return Err(Error::domain(format!(
                "pulse `{}`: peak_intensity >= 0 violated",
                self.label
            )));
        }
        if !(self.polarization_angle.abs() <= T::lit(90.0)) {
            return Err(Error::domain(format!(
                "pulse `{}`: |polarization_angle| <= 90 violated",
                self.label
            )));
        }
        if !self.delay.is_finite() || !self.carrier_phase.is_finite() {
            return Err(Error::domain(format!("pulse `{}`: non-finite delay or phase", self.label)));
        }
        Ok(())
    }

    /// Carrier angular frequency in rad/fs.
    pub fn omega(&self) -> T {
        angular_frequency(self.wavelength)
    }

    /// Optical period in fs.
    pub fn period(&self) -> T {
        self.wavelength / crate::units::UnitSystem::c::<T>()
    }

    /// Peak field amplitude E₀ in V/nm (before projection).
    pub fn peak_field(&self) -> T {
        intensity_to_peak_field(self.peak_intensity).unwrap_or_else(|_| T::nan())
    }

    /// `cos θ` projection factor onto the tip axis.
    pub fn projection(&self) -> T {
        self.polarization_angle.to_radians().cos()
    }

    /// Amplitude envelope, normalized so the intensity envelope has FWHM `fwhm`.
    pub fn envelope(&self, t: T) -> T {
        let x = (t - self.delay) / self.fwhm;
        (-T::lit(2.0) * T::LN_2() * x * x).exp()
    }

    /// Photon-absorption (positive-frequency) part of the projected field:
    /// `E(t) = 2 Re E⁺(t)` with `E⁺ ∝ exp(-i(ω(t-τ)+φ))`.
    pub fn absorption_component(&self, t: T) -> Complex<T> {
        let amp = T::lit(0.5) * self.peak_field() * self.projection() * self.envelope(t);
        let arg = self.omega() * (t - self.delay) + self.carrier_phase;
        Complex::from_polar(amp, -arg)
    }
}

/// Field along the tip axis in V/nm for one pulse.
pub fn projected_field_at<T: Real>(pulse: &PulseSpec<T>, t: T) -> T {
    let carrier = (pulse.omega() * (t - pulse.delay) + pulse.carrier_phase).cos();
    pulse.peak_field() * pulse.projection() * pulse.envelope(t) * carrier
}

/// Superposition of colored pulses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoColorField<T> {
    pub pulses: Vec<PulseSpec<T>>,
}

impl<T: Real> TwoColorField<T> {
    pub fn new(pulses: Vec<PulseSpec<T>>) -> Self {
        TwoColorField { pulses }
    }

    pub fn single(pulse: PulseSpec<T>) -> Self {
        TwoColorField { pulses: vec![pulse] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pulses.is_empty() {
            return Err(Error::domain("field needs at least one pulse"));
        }
        for (i, p) in self.pulses.iter().enumerate() {
            p.validate()?;
            if self.pulses[..i].iter().any(|q| q.label == p.label) {
                return Err(Error::domain(format!("duplicate pulse label `{}`", p.label)));
            }
        }
        Ok(())
    }

    /// Distinct wavelengths are needed to account photons by color.
    pub fn validate_distinct_colors(&self) -> Result<()> {
        for (i, p) in self.pulses.iter().enumerate() {
            if self.pulses[..i].iter().any(|q| q.wavelength == p.wavelength) {
                return Err(Error::domain(format!(
                    "pulse `{}` repeats a wavelength; channel accounting by color is ambiguous",
                    p.label
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, label: &str) -> Option<&PulseSpec<T>> {
        self.pulses.iter().find(|p| p.label == label)
    }

    pub fn get_mut(&mut self, label: &str) -> Option<&mut PulseSpec<T>> {
        self.pulses.iter_mut().find(|p| p.label == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.pulses.iter().position(|p| p.label == label)
    }

    /// Keeps only the pulses whose labels are listed.
    pub fn only(&self, labels: &[&str]) -> Self {
        TwoColorField {
            pulses: self
                .pulses
                .iter()
                .filter(|p| labels.contains(&p.label.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Shifts every pulse by `delta` fs.
    pub fn shifted(&self, delta: T) -> Self {
        let mut out = self.clone();
        for p in &mut out.pulses {
            p.delay += delta;
        }
        out
    }

    pub fn widest_fwhm(&self) -> T {
        self.pulses.iter().map(|p| p.fwhm).fold(T::zero(), T::max)
    }

    pub fn shortest_period(&self) -> T {
        self.pulses
            .iter()
            .map(|p| p.period())
            .fold(T::infinity(), T::min)
    }
}

/// Total projected field in V/nm.
pub fn total_field_at<T: Real>(field: &TwoColorField<T>, t: T) -> T {
    field.pulses.iter().map(|p| projected_field_at(p, t)).sum()
}

/// Per-pulse quantities precomputed for the inner integration loops.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PulseKernel<T> {
    /// Half of the projected peak amplitude, E₀ cosθ / 2.
    pub half_amplitude: T,
    pub omega: T,
    pub delay: T,
    /// `2 ln 2 / fwhm²`.
    pub width: T,
    /// `exp(i(ω τ - φ))`: carrier offset so that `E⁺ = A env exp(-iωt) * offset`.
    pub offset: Complex<T>,
}

impl<T: Real> PulseKernel<T> {
    pub fn new(p: &PulseSpec<T>) -> Self {
        let omega = p.omega();
        PulseKernel {
            half_amplitude: T::lit(0.5) * p.peak_field() * p.projection(),
            omega,
            delay: p.delay,
            width: T::lit(2.0) * T::LN_2() / (p.fwhm * p.fwhm),
            offset: Complex::from_polar(T::one(), omega * p.delay - p.carrier_phase),
        }
    }

    #[inline]
    pub fn envelope_amplitude(&self, t: T) -> T {
        let x = t - self.delay;
        self.half_amplitude * (-self.width * x * x).exp()
    }
}
