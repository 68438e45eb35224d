//! Few-level model systems shared by the propagator and the channel ladder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::units::{schottky_effective_work_function, UnitSystem};

/// How final levels reached by different channels combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalStates {
    /// Each channel ends in its own (orthogonal) continuum state; channel
    /// probabilities add.
    Distinct,
    /// Channels share final levels and interfere there.
    Shared,
}

impl FinalStates {
    pub fn as_str(&self) -> &'static str {
        match self {
            FinalStates::Distinct => "distinct",
            FinalStates::Shared => "shared",
        }
    }
}

/// Energies (eV), real symmetric dipole matrix (e·nm) and the initial/final
/// level bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSystem<T> {
    pub energies: Vec<T>,
    pub dipoles: Vec<Vec<T>>,
    pub initial_index: usize,
    /// Emission levels. The first entry is the primary final state.
    pub final_indices: Vec<usize>,
    pub final_states: FinalStates,
}

impl<T: Real> LevelSystem<T> {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn final_index(&self) -> usize {
        self.final_indices[0]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.energies.len();
        if n < 2 {
            return Err(Error::domain("level system needs at least two levels"));
        }
        if self.dipoles.len() != n || self.dipoles.iter().any(|row| row.len() != n) {
            return Err(Error::domain("dipole matrix must be square and match the level count"));
        }
        if self.energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::domain("level energies must be finite"));
        }
        for m in 0..n {
            if self.dipoles[m][m] != T::zero() {
                return Err(Error::domain("dipole matrix must have zero diagonal"));
            }
            for k in 0..n {
                let (a, b) = (self.dipoles[m][k], self.dipoles[k][m]);
                if !a.is_finite() || a != b {
                    return Err(Error::domain("dipole matrix must be real and symmetric"));
                }
            }
        }
        if self.initial_index >= n {
            return Err(Error::domain("initial_index out of range"));
        }
        if self.final_indices.is_empty() {
            return Err(Error::domain("at least one final level is required"));
        }
        for &f in &self.final_indices {
            if f >= n {
                return Err(Error::domain("final index out of range"));
            }
            if !(self.energies[f] > self.energies[self.initial_index]) {
                return Err(Error::domain("final energy must exceed the initial energy"));
            }
        }
        Ok(())
    }

    /// Nonzero couplings as `(m, n, d_mn)` with `m < n`.
    pub fn couplings(&self) -> Vec<(usize, usize, T)> {
        let n = self.len();
        let mut out = Vec::new();
        for m in 0..n {
            for k in (m + 1)..n {
                let d = self.dipoles[m][k];
                if d != T::zero() {
                    out.push((m, k, d));
                }
            }
        }
        out
    }

    /// Level angular frequencies `E_m / ħ` in rad/fs.
    pub fn angular_energies(&self) -> Vec<T> {
        let hbar = UnitSystem::hbar::<T>();
        self.energies.iter().map(|&e| e / hbar).collect()
    }

    fn empty(n: usize) -> (Vec<T>, Vec<Vec<T>>) {
        (vec![T::zero(); n], vec![vec![T::zero(); n]; n])
    }

    fn couple(d: &mut [Vec<T>], a: usize, b: usize, value: T) {
        d[a][b] = value;
        d[b][a] = value;
    }

    /// Two levels separated by `spacing` eV.
    pub fn two_level(spacing: T, dipole: T) -> Self {
        let (mut e, mut d) = Self::empty(2);
        e[1] = spacing;
        Self::couple(&mut d, 0, 1, dipole);
        LevelSystem {
            energies: e,
            dipoles: d,
            initial_index: 0,
            final_indices: vec![1],
            final_states: FinalStates::Shared,
        }
    }

    /// Qualitative desk model: a two-level system whose spacing is the
    /// Schottky-lowered work function of the default tungsten tip, 0.1 e·nm.
    pub fn desk_two_level() -> Self {
        let wf = schottky_effective_work_function(T::lit(6.0), T::lit(8.5e8))
            .ok()
            .and_then(|w| w.effective())
            .unwrap_or_else(|| T::lit(4.894));
        Self::two_level(wf, T::lit(0.1))
    }

    /// `photons + 1` equally spaced levels `k·photon_ev` with nearest-neighbour
    /// couplings; every step of the `photons`-photon path is resonant.
    pub fn resonant_ladder(photon_ev: T, photons: usize, dipole: T) -> Self {
        let n = photons + 1;
        let (mut e, mut d) = Self::empty(n);
        for (k, ek) in e.iter_mut().enumerate() {
            *ek = photon_ev * T::from_usize_lossy(k);
        }
        for k in 0..photons {
            Self::couple(&mut d, k, k + 1, dipole);
        }
        LevelSystem {
            energies: e,
            dipoles: d,
            initial_index: 0,
            final_indices: vec![photons],
            final_states: FinalStates::Shared,
        }
    }

    /// Polycrystalline-tip model: separate virtual ladders ending in three
    /// distinct degenerate final levels, one per lowest-order channel.
    ///
    /// Levels: 0 initial; 1..3 fundamental virtual ladder detuned by
    /// `detuning`; 4 four-photon final; 5 multicolor final (reached from level
    /// 2 by one harmonic photon); 6 harmonic virtual level; 7 harmonic final.
    pub fn polycrystalline(
        fundamental_ev: T,
        harmonic_ev: T,
        detuning: T,
        dipole: T,
        harmonic_dipole: T,
    ) -> Self {
        let (mut e, mut d) = Self::empty(8);
        let w = fundamental_ev;
        let two = T::lit(2.0);
        e[1] = w + detuning;
        e[2] = two * w + detuning;
        e[3] = T::lit(3.0) * w + detuning;
        e[4] = T::lit(4.0) * w;
        e[5] = two * w + harmonic_ev;
        e[6] = harmonic_ev + detuning;
        e[7] = two * harmonic_ev;
        Self::couple(&mut d, 0, 1, dipole);
        Self::couple(&mut d, 1, 2, dipole);
        Self::couple(&mut d, 2, 3, dipole);
        Self::couple(&mut d, 3, 4, dipole);
        Self::couple(&mut d, 2, 5, dipole);
        Self::couple(&mut d, 0, 6, harmonic_dipole);
        Self::couple(&mut d, 6, 7, harmonic_dipole);
        LevelSystem {
            energies: e,
            dipoles: d,
            initial_index: 0,
            final_indices: vec![4, 5, 7],
            final_states: FinalStates::Distinct,
        }
    }

    /// Single-crystal model with a shared final level: the resonant ladder
    /// `k·ν` (k = 0..4) carries fundamental photons between neighbours and
    /// harmonic photons between next-nearest neighbours, so the four-photon
    /// and the multicolor channels end in the same final level.
    pub fn shared_final_ladder(fundamental_ev: T, dipole: T, harmonic_dipole: T) -> Self {
        let (mut e, mut d) = Self::empty(5);
        for (k, ek) in e.iter_mut().enumerate() {
            *ek = fundamental_ev * T::from_usize_lossy(k);
        }
        for k in 0..4 {
            Self::couple(&mut d, k, k + 1, dipole);
        }
        for k in 0..3 {
            Self::couple(&mut d, k, k + 2, harmonic_dipole);
        }
        LevelSystem {
            energies: e,
            dipoles: d,
            initial_index: 0,
            final_indices: vec![4],
            final_states: FinalStates::Shared,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        LevelSystem::<f64>::desk_two_level().validate().unwrap();
        LevelSystem::<f64>::resonant_ladder(1.55, 4, 0.1).validate().unwrap();
        LevelSystem::<f64>::polycrystalline(1.55, 3.1, 0.3, 0.01, 0.01)
            .validate()
            .unwrap();
        LevelSystem::<f64>::shared_final_ladder(0.79, 0.01, 0.01)
            .validate()
            .unwrap();
    }

    #[test]
    fn desk_spacing_is_effective_work_function() {
        let s = LevelSystem::<f64>::desk_two_level();
        assert!((s.energies[1] - 4.894).abs() < 5e-4);
        assert_eq!(s.dipoles[0][1], 0.1);
    }

    #[test]
    fn rejects_asymmetric_or_diagonal_dipoles() {
        let mut s = LevelSystem::<f64>::two_level(1.0, 0.1);
        s.dipoles[0][1] = 0.2;
        assert!(s.validate().is_err());
        let mut s = LevelSystem::<f64>::two_level(1.0, 0.1);
        s.dipoles[0][0] = 0.2;
        assert!(s.validate().is_err());
        let mut s = LevelSystem::<f64>::two_level(1.0, 0.1);
        s.final_indices = vec![0];
        assert!(s.validate().is_err());
        let mut s = LevelSystem::<f64>::two_level(1.0, 0.1);
        s.final_indices = vec![5];
        assert!(s.validate().is_err());
    }

    #[test]
    fn couplings_listed_once() {
        let s = LevelSystem::<f64>::polycrystalline(1.55, 3.1, 0.3, 0.01, 0.02);
        assert_eq!(s.couplings().len(), 7);
        assert!(s.couplings().iter().all(|&(m, n, _)| m < n));
    }
}
