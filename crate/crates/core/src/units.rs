//! Physical constants, unit conventions and the closed-form setup estimates.
//!
//! Internal units are eV, fs, nm and V/nm. Dipole elements are in e·nm so that
//! a dipole times a field is directly an energy in eV.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Fixed unit conventions (CODATA 2018, truncated to 10 significant digits).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitSystem;

impl UnitSystem {
    /// Reduced Planck constant in eV·fs.
    pub const HBAR: f64 = 0.6582119569;
    /// Speed of light in nm/fs.
    pub const C: f64 = 299.792458;
    /// Planck constant times c in eV·nm.
    pub const HC: f64 = 1239.841984;
    /// e²/4πε₀ in eV·nm.
    pub const COULOMB_E2: f64 = 1.439964;

    /// Speed of light in m/s, used only for the SI intensity conversion.
    pub const C_SI: f64 = 299_792_458.0;
    /// Vacuum permittivity in F/m.
    pub const EPSILON0_SI: f64 = 8.854_187_813e-12;

    #[inline]
    pub fn hbar<T: Real>() -> T {
        T::lit(Self::HBAR)
    }

    #[inline]
    pub fn c<T: Real>() -> T {
        T::lit(Self::C)
    }

    #[inline]
    pub fn hc<T: Real>() -> T {
        T::lit(Self::HC)
    }

    #[inline]
    pub fn coulomb_e2<T: Real>() -> T {
        T::lit(Self::COULOMB_E2)
    }
}

/// Biased nanotip geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TipSpec<T> {
    /// Bias magnitude in V.
    pub bias_voltage: T,
    /// Apex radius in nm.
    pub radius: T,
    /// Geometric field-enhancement factor k in `E = V / (k r)`.
    pub enhancement_factor: T,
    /// Nominal work function in eV.
    pub nominal_work_function: T,
}

impl<T: Real> TipSpec<T> {
    /// The polycrystalline tungsten tip used in the ω/2ω experiment.
    pub fn tungsten_default() -> Self {
        TipSpec {
            bias_voltage: T::lit(170.0),
            radius: T::lit(50.0),
            enhancement_factor: T::lit(4.0),
            nominal_work_function: T::lit(6.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) {
            return Err(Error::domain("tip radius > 0 violated"));
        }
        if !(self.enhancement_factor >= T::one()) {
            return Err(Error::domain("enhancement_factor >= 1 violated"));
        }
        if !(self.nominal_work_function > T::zero()) {
            return Err(Error::domain("nominal_work_function > 0 violated"));
        }
        if !self.bias_voltage.is_finite() {
            return Err(Error::domain("bias voltage must be finite"));
        }
        Ok(())
    }
}

/// Photon energy in eV for a vacuum wavelength in nm.
pub fn photon_energy<T: Real>(wavelength_nm: T) -> Result<T> {
    if !(wavelength_nm > T::zero()) {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength_nm} nm"
        )));
    }
    Ok(UnitSystem::hc::<T>() / wavelength_nm)
}

/// Carrier angular frequency in rad/fs for a wavelength in nm.
pub fn angular_frequency<T: Real>(wavelength_nm: T) -> T {
    T::TAU() * UnitSystem::c::<T>() / wavelength_nm
}

/// Apex DC field `V / (k r)` in V/m.
pub fn dc_field<T: Real>(tip: &TipSpec<T>) -> Result<T> {
    tip.validate()?;
    let radius_m = tip.radius * T::lit(1e-9);
    Ok(tip.bias_voltage.abs() / (tip.enhancement_factor * radius_m))
}

/// Outcome of the Schottky estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum WorkFunction<T> {
    /// Lowered barrier, still above the Fermi level.
    Effective { value: T, lowering: T },
    /// The lowering reaches the nominal work function: field-emission regime.
    BarrierSuppressed { nominal: T, lowering: T },
}

impl<T: Real> WorkFunction<T> {
    pub fn effective(&self) -> Option<T> {
        match *self {
            WorkFunction::Effective { value, .. } => Some(value),
            WorkFunction::BarrierSuppressed { .. } => None,
        }
    }

    pub fn lowering(&self) -> T {
        match *self {
            WorkFunction::Effective { lowering, .. } => lowering,
            WorkFunction::BarrierSuppressed { lowering, .. } => lowering,
        }
    }
}

/// Schottky lowering `sqrt(e³E/4πε₀)` in eV for a field in V/m.
pub fn schottky_lowering<T: Real>(dc_field_v_per_m: T) -> T {
    let field_v_per_nm = dc_field_v_per_m * T::lit(1e-9);
    (UnitSystem::coulomb_e2::<T>() * field_v_per_nm).sqrt()
}

/// Effective work function in eV under a DC field (V/m).
pub fn schottky_effective_work_function<T: Real>(
    nominal_ev: T,
    dc_field_v_per_m: T,
) -> Result<WorkFunction<T>> {
    if !(nominal_ev > T::zero()) {
        return Err(Error::domain("nominal work function must be > 0"));
    }
    if !(dc_field_v_per_m >= T::zero()) {
        return Err(Error::domain("dc field must be >= 0"));
    }
    let lowering = schottky_lowering(dc_field_v_per_m);
    if lowering >= nominal_ev {
        Ok(WorkFunction::BarrierSuppressed {
            nominal: nominal_ev,
            lowering,
        })
    } else {
        Ok(WorkFunction::Effective {
            value: nominal_ev - lowering,
            lowering,
        })
    }
}

/// Peak field amplitude in V/nm for a cycle-averaged intensity in W/cm².
pub fn intensity_to_peak_field<T: Real>(intensity_w_cm2: T) -> Result<T> {
    if !(intensity_w_cm2 >= T::zero()) {
        return Err(Error::domain(format!(
            "intensity must be >= 0, got {intensity_w_cm2} W/cm^2"
        )));
    }
    let si = intensity_w_cm2 * T::lit(1e4);
    let e_v_per_m = (T::lit(2.0) * si / T::lit(UnitSystem::C_SI * UnitSystem::EPSILON0_SI)).sqrt();
    Ok(e_v_per_m * T::lit(1e-9))
}

/// Composite two-color intensity `(I_ω² I_2ω)^{1/3}`.
pub fn two_color_intensity<T: Real>(i_w: T, i_2w: T) -> T {
    (i_w * i_w * i_2w).cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn hc_consistent_with_hbar_and_c() {
        let derived = UnitSystem::HBAR * UnitSystem::C * std::f64::consts::TAU;
        assert_relative_eq!(derived, UnitSystem::HC, max_relative = 1e-6);
    }

    #[test]
    fn photon_energies() {
        // ħc/λ by hand: 1239.841984 / 800 and / 400.
        assert_relative_eq!(photon_energy(800.0).unwrap(), 1.54980248, epsilon = 1e-8);
        assert_relative_eq!(photon_energy(400.0).unwrap(), 3.09960496, epsilon = 1e-8);
        let lambda = 1234.5_f64;
        assert_eq!(
            photon_energy(lambda / 2.0).unwrap(),
            2.0 * photon_energy(lambda).unwrap()
        );
        assert!(photon_energy(0.0_f64).is_err());
        assert!(photon_energy(-3.0_f64).is_err());
    }

    #[test]
    fn photon_energy_self_consistent() {
        let e800 = photon_energy(800.0_f64).unwrap();
        let e400 = photon_energy(400.0_f64).unwrap();
        assert!((e800 + e800 - e400).abs() <= 1e-9 * e400);
    }

    #[test]
    fn dc_field_examples() {
        let tip = TipSpec::<f64>::tungsten_default();
        assert_relative_eq!(dc_field(&tip).unwrap(), 8.5e8, max_relative = 1e-12);
        let unit_k = TipSpec {
            enhancement_factor: 1.0,
            ..tip
        };
        assert_relative_eq!(dc_field(&unit_k).unwrap(), 170.0 / 50e-9, max_relative = 1e-12);
        let doubled = TipSpec {
            bias_voltage: 340.0,
            ..tip
        };
        assert_relative_eq!(dc_field(&doubled).unwrap(), 1.7e9, max_relative = 1e-12);
    }

    #[test]
    fn tip_invariants() {
        let mut tip = TipSpec::<f64>::tungsten_default();
        tip.radius = 0.0;
        assert!(dc_field(&tip).is_err());
        let mut tip = TipSpec::<f64>::tungsten_default();
        tip.enhancement_factor = 0.5;
        assert!(tip.validate().is_err());
    }

    #[test]
    fn schottky_examples() {
        let wf = schottky_effective_work_function(6.0, 8.5e8).unwrap();
        assert_relative_eq!(wf.effective().unwrap(), 4.894, epsilon = 5e-4);
        let zero = schottky_effective_work_function(5.3, 0.0).unwrap();
        assert_eq!(zero.effective(), Some(5.3));
        let quarter = schottky_effective_work_function(6.0, 2.125e8).unwrap();
        assert_relative_eq!(quarter.lowering(), 0.5532, epsilon = 5e-5);
        assert_relative_eq!(quarter.effective().unwrap(), 5.447, epsilon = 5e-4);
        assert_relative_eq!(2.0 * quarter.lowering(), wf.lowering(), max_relative = 1e-12);
    }

    #[test]
    fn schottky_barrier_suppression_is_flagged() {
        // sqrt(1.44 * 100 V/nm) = 12 eV > 6 eV.
        let wf = schottky_effective_work_function(6.0, 1e11).unwrap();
        assert!(matches!(wf, WorkFunction::BarrierSuppressed { .. }));
        assert!(wf.effective().is_none());
        assert!(schottky_effective_work_function(6.0, -1.0).is_err());
    }

    #[test]
    fn schottky_halving_field() {
        for &e in &[1e7, 3e8, 8.5e8, 2e9] {
            let ratio = schottky_lowering(e / 2.0) / schottky_lowering(e);
            assert_relative_eq!(ratio, std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-12);
        }
    }

    #[test]
    fn intensity_field_conversion() {
        // sqrt(2 * 6.7e15 / (c ε0)) = 2.2468e9 V/m
        let e = intensity_to_peak_field(6.7e11).unwrap();
        assert_relative_eq!(e, 2.247, epsilon = 5e-4);
        assert_eq!(intensity_to_peak_field(0.0).unwrap(), 0.0);
        let i = 3.3e10;
        assert_relative_eq!(
            intensity_to_peak_field(4.0 * i).unwrap(),
            2.0 * intensity_to_peak_field(i).unwrap(),
            max_relative = 1e-14
        );
        assert!(intensity_to_peak_field(-1.0).is_err());
    }

    #[test]
    fn two_color_intensity_examples() {
        // (6.7e11² · 2.2e10)^{1/3} = (9.8758e33)^{1/3}
        assert_relative_eq!(two_color_intensity(6.7e11, 2.2e10), 2.1455e11, max_relative = 1e-3);
        assert_relative_eq!(two_color_intensity(5e10, 5e10), 5e10, max_relative = 1e-14);
        assert_eq!(two_color_intensity(0.0, 1e10), 0.0);
    }

    #[test]
    fn f32_path_agrees() {
        let e32 = photon_energy(800.0_f32).unwrap();
        assert!((e32 as f64 - 1.54980248).abs() < 1e-6);
        let wf = schottky_effective_work_function(6.0_f32, 8.5e8).unwrap();
        assert!((wf.effective().unwrap() - 4.8937).abs() < 1e-3);
    }

    proptest::proptest! {
        #[test]
        fn two_color_intensity_homogeneous(iw in 1e6f64..1e13, i2w in 1e6f64..1e13, s in 1e-3f64..1e3) {
            let a = two_color_intensity(s * iw, s * i2w);
            let b = s * two_color_intensity(iw, i2w);
            proptest::prop_assert!((a - b).abs() <= 1e-12 * b);
        }

        #[test]
        fn schottky_monotone_concave(e in 1e5f64..5e9, de in 1e5f64..1e8) {
            let l0 = schottky_lowering(e);
            let l1 = schottky_lowering(e + de);
            let l2 = schottky_lowering(e + 2.0 * de);
            proptest::prop_assert!(l1 > l0);
            proptest::prop_assert!(l2 - l1 <= l1 - l0 + 1e-15);
        }
    }
}
