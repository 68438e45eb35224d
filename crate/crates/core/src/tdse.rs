//! Direct fixed-step RK4 integration of the few-level Schrödinger equation in
//! the interaction picture, `iħ ȧ_m = Σ_n ⟨m|−d̂ E(t)|n⟩ e^{iω_mn t} a_n`,
//! with the full (co- and counter-rotating) carrier.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{StepSampler, TimeGrid};
use crate::levels::LevelSystem;
use crate::pulse::TwoColorField;
use crate::scalar::Real;
use crate::units::UnitSystem;

pub const NORM_TOLERANCE: f64 = 1e-6;

/// Interaction-picture amplitudes at `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub amplitudes: Vec<Complex<T>>,
    pub time: T,
}

impl<T: Real> StateVector<T> {
    pub fn basis(levels: usize, index: usize, time: T) -> Self {
        let mut amplitudes = vec![Complex::new(T::zero(), T::zero()); levels];
        amplitudes[index] = Complex::new(T::one(), T::zero());
        StateVector { amplitudes, time }
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn population(&self, level: usize) -> T {
        self.amplitudes[level].norm_sqr()
    }
}

/// Result of a propagation together with the worst norm excursion seen.
#[derive(Debug, Clone)]
pub struct Propagation<T> {
    pub state: StateVector<T>,
    pub max_norm_drift: T,
    pub dt: T,
}

/// Integrates from `grid.t_start` (initial level populated) to `grid.t_end`.
pub fn propagate<T: Real>(
    system: &LevelSystem<T>,
    field: &TwoColorField<T>,
    grid: &TimeGrid<T>,
) -> Result<StateVector<T>> {
    propagate_checked(system, field, grid, T::lit(NORM_TOLERANCE)).map(|p| p.state)
}

/// As [`propagate`], with an explicit norm tolerance and drift report.
pub fn propagate_checked<T: Real>(
    system: &LevelSystem<T>,
    field: &TwoColorField<T>,
    grid: &TimeGrid<T>,
    norm_tolerance: T,
) -> Result<Propagation<T>> {
    system.validate()?;
    field.validate()?;
    grid.validate()?;

    let n = system.len();
    let h = grid.effective_dt();
    let steps = grid.steps();
    let hbar = UnitSystem::hbar::<T>();
    let zero = Complex::new(T::zero(), T::zero());

    // Directed sparse couplings (target, source, d).
    let mut edges = Vec::new();
    for (m, k, d) in system.couplings() {
        edges.push((m, k, d));
        edges.push((k, m, d));
    }

    let mut sampler = StepSampler::new(system.angular_energies(), field, h);
    let colors = sampler.colors();
    let mut y = StateVector::basis(n, system.initial_index, grid.t_start).amplitudes;
    let mut k1 = vec![zero; n];
    let mut k2 = vec![zero; n];
    let mut k3 = vec![zero; n];
    let mut k4 = vec![zero; n];
    let mut tmp = vec![zero; n];
    let mut z = vec![zero; n];
    let mut acc = vec![zero; n];
    let mut max_drift = T::zero();

    let two = T::lit(2.0);
    let half_h = h * T::lit(0.5);
    let sixth_h = h / T::lit(6.0);

    for step in 0..steps {
        let t = grid.t_start + h * T::from_usize_lossy(step);
        sampler.sample(t);
        let s = &sampler.samples;
        let efield: [T; 3] = std::array::from_fn(|j| {
            (0..colors).map(|c| s.eplus[j][c].re).sum::<T>() * two
        });

        let mut deriv = |j: usize, y: &[Complex<T>], out: &mut [Complex<T>]| {
            let e = efield[j];
            if e == T::zero() {
                out.iter_mut().for_each(|o| *o = zero);
                return;
            }
            let ph = &s.phases[j];
            for m in 0..n {
                z[m] = ph[m].conj() * y[m];
                acc[m] = zero;
            }
            for &(m, k, d) in &edges {
                acc[m] += z[k] * d;
            }
            let coef = Complex::new(T::zero(), e / hbar);
            for m in 0..n {
                out[m] = coef * ph[m] * acc[m];
            }
        };

        deriv(0, &y, &mut k1);
        for m in 0..n {
            tmp[m] = y[m] + k1[m] * half_h;
        }
        deriv(1, &tmp, &mut k2);
        for m in 0..n {
            tmp[m] = y[m] + k2[m] * half_h;
        }
        deriv(1, &tmp, &mut k3);
        for m in 0..n {
            tmp[m] = y[m] + k3[m] * h;
        }
        deriv(2, &tmp, &mut k4);
        for m in 0..n {
            y[m] += (k1[m] + (k2[m] + k3[m]) * two + k4[m]) * sixth_h;
        }

        let drift = (y.iter().map(|a| a.norm_sqr()).sum::<T>() - T::one()).abs();
        if drift > max_drift {
            max_drift = drift;
        }
        if !(drift <= norm_tolerance) {
            return Err(Error::NormDrift {
                dt: h.as_f64(),
                drift: drift.as_f64(),
                tolerance: norm_tolerance.as_f64(),
            });
        }
    }

    Ok(Propagation {
        state: StateVector {
            amplitudes: y,
            time: grid.t_end,
        },
        max_norm_drift: max_drift,
        dt: h,
    })
}

/// Population summed over the system's final levels.
pub fn emission_probability<T: Real>(state: &StateVector<T>, system: &LevelSystem<T>) -> T {
    system
        .final_indices
        .iter()
        .map(|&f| state.population(f))
        .sum()
}
