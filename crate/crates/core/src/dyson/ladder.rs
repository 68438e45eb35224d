//! Channel amplitudes by ladder propagation.
//!
//! Partial amplitudes are indexed by `(level, photons absorbed per color)`.
//! Absorbing one photon of color `c` on the dipole link `n → m` feeds
//! `(m, κ)` from `(n, κ − e_c)` through the positive-frequency field
//! component `E⁺_c`:
//!
//! `ȧ(m, κ) = (i/ħ) Σ_{n,c} d_mn e^{iω_mn t} E⁺_c(t) a(n, κ − e_c)`
//!
//! with `a(initial, 0) ≡ 1`. The amplitude at `(final, κ_channel)` is then the
//! order-`|κ|` time-ordered Dyson term restricted to absorption, summed over
//! all intermediate levels and all photon orderings, at a cost linear in the
//! grid length.

use std::collections::{HashMap, VecDeque};

use num_complex::Complex;

use super::channel::{ChannelAmplitude, ChannelSpec};
use crate::error::{Error, Result};
use crate::grid::{StepSampler, TimeGrid};
use crate::levels::LevelSystem;
use crate::pulse::TwoColorField;
use crate::scalar::Real;
use crate::units::UnitSystem;

/// Largest carrier-detuning phase advance allowed per step.
pub const MAX_PHASE_PER_STEP: f64 = std::f64::consts::FRAC_PI_4;

/// Minimum number of steps per pulse FWHM.
pub const MIN_STEPS_PER_FWHM: f64 = 8.0;

/// Amplitude of `channel` into the primary final level.
pub fn channel_amplitude<T: Real>(
    system: &LevelSystem<T>,
    field: &TwoColorField<T>,
    channel: &ChannelSpec,
    grid: &TimeGrid<T>,
) -> Result<ChannelAmplitude<T>> {
    let primary = system.final_index();
    channel_amplitudes(system, field, std::slice::from_ref(channel), grid)?
        .into_iter()
        .find(|a| a.final_index == primary)
        .ok_or_else(|| Error::config("primary final level missing from amplitudes"))
}

/// Amplitudes of every channel into every final level, from one propagation.
/// Output is channel-major, finals in `system.final_indices` order.
pub fn channel_amplitudes<T: Real>(
    system: &LevelSystem<T>,
    field: &TwoColorField<T>,
    channels: &[ChannelSpec],
    grid: &TimeGrid<T>,
) -> Result<Vec<ChannelAmplitude<T>>> {
    system.validate()?;
    field.validate()?;
    grid.validate()?;
    for ch in channels {
        ch.validate_against(field)?;
    }
    let plan = LadderPlan::build(system, field, channels)?;
    let values = plan.run(system, field, grid)?;
    let mut out = Vec::with_capacity(channels.len() * system.final_indices.len());
    for (ci, ch) in channels.iter().enumerate() {
        for (fi, &f) in system.final_indices.iter().enumerate() {
            out.push(ChannelAmplitude {
                channel: ch.clone(),
                final_index: f,
                value: values[ci][fi],
            });
        }
    }
    Ok(out)
}

/// One absorption link type: photon of `color` on dipole link `source → target`.
#[derive(Debug, Clone, Copy)]
struct Link<T> {
    target_level: usize,
    source_level: usize,
    color: usize,
    dipole: T,
}

#[derive(Debug, Clone, Copy)]
struct Term {
    target: usize,
    source: usize,
    link: usize,
}

struct LadderPlan<T> {
    /// Pulse index (into the field) of each ladder color.
    color_pulses: Vec<usize>,
    links: Vec<Link<T>>,
    terms: Vec<Term>,
    states: usize,
    initial_state: usize,
    /// `[channel][final] -> state` (None if structurally unreachable).
    outputs: Vec<Vec<Option<usize>>>,
}

impl<T: Real> LadderPlan<T> {
    fn build(
        system: &LevelSystem<T>,
        field: &TwoColorField<T>,
        channels: &[ChannelSpec],
    ) -> Result<Self> {
        // Colors in field order, restricted to those the channels use.
        let color_pulses: Vec<usize> = field
            .pulses
            .iter()
            .enumerate()
            .filter(|(_, p)| channels.iter().any(|c| c.count(&p.label) > 0))
            .map(|(i, _)| i)
            .collect();
        let ncol = color_pulses.len();
        let to_vec = |ch: &ChannelSpec| -> Vec<u32> {
            color_pulses
                .iter()
                .map(|&i| ch.count(&field.pulses[i].label))
                .collect()
        };
        let targets: Vec<Vec<u32>> = channels.iter().map(to_vec).collect();

        // Downward closure of the requested photon-count vectors.
        let mut combos: Vec<Vec<u32>> = Vec::new();
        let mut combo_index: HashMap<Vec<u32>, usize> = HashMap::new();
        for t in &targets {
            let mut stack = vec![t.clone()];
            while let Some(v) = stack.pop() {
                if combo_index.contains_key(&v) {
                    continue;
                }
                combo_index.insert(v.clone(), combos.len());
                combos.push(v.clone());
                for c in 0..ncol {
                    if v[c] > 0 {
                        let mut w = v.clone();
                        w[c] -= 1;
                        stack.push(w);
                    }
                }
            }
        }

        let nlev = system.len();
        let state_of = |level: usize, combo: usize| combo * nlev + level;
        let nstates = combos.len() * nlev;

        let mut links = Vec::new();
        for (m, k, d) in system.couplings() {
            for c in 0..ncol {
                links.push(Link { target_level: m, source_level: k, color: c, dipole: d });
                links.push(Link { target_level: k, source_level: m, color: c, dipole: d });
            }
        }

        let mut raw_terms = Vec::new();
        for (ci, v) in combos.iter().enumerate() {
            for (li, link) in links.iter().enumerate() {
                let c = link.color;
                if v[c] == 0 {
                    continue;
                }
                let mut w = v.clone();
                w[c] -= 1;
                let src_combo = combo_index[&w];
                raw_terms.push(Term {
                    target: state_of(link.target_level, ci),
                    source: state_of(link.source_level, src_combo),
                    link: li,
                });
            }
        }

        let zero_combo = combo_index.get(&vec![0; ncol]).copied();
        let initial_raw = zero_combo.map(|z| state_of(system.initial_index, z));

        // Forward reachability from the initial state.
        let mut fwd = vec![false; nstates];
        let mut by_source: Vec<Vec<usize>> = vec![Vec::new(); nstates];
        let mut by_target: Vec<Vec<usize>> = vec![Vec::new(); nstates];
        for (ti, t) in raw_terms.iter().enumerate() {
            by_source[t.source].push(ti);
            by_target[t.target].push(ti);
        }
        let mut queue = VecDeque::new();
        if let Some(s0) = initial_raw {
            fwd[s0] = true;
            queue.push_back(s0);
        }
        while let Some(s) = queue.pop_front() {
            for &ti in &by_source[s] {
                let t = raw_terms[ti].target;
                if !fwd[t] {
                    fwd[t] = true;
                    queue.push_back(t);
                }
            }
        }

        // Backward reachability from every requested output.
        let mut bwd = vec![false; nstates];
        let mut raw_outputs = Vec::new();
        for t in &targets {
            let ci = combo_index[t];
            let row: Vec<usize> = system
                .final_indices
                .iter()
                .map(|&f| state_of(f, ci))
                .collect();
            for &s in &row {
                if !bwd[s] {
                    bwd[s] = true;
                    queue.push_back(s);
                }
            }
            raw_outputs.push(row);
        }
        while let Some(s) = queue.pop_front() {
            for &ti in &by_target[s] {
                let src = raw_terms[ti].source;
                if !bwd[src] {
                    bwd[src] = true;
                    queue.push_back(src);
                }
            }
        }

        let live = |s: usize| fwd[s] && bwd[s];
        let mut compact = vec![usize::MAX; nstates];
        let mut next = 0usize;
        let mut assign = |s: usize, compact: &mut Vec<usize>| {
            if compact[s] == usize::MAX {
                compact[s] = next;
                next += 1;
            }
            compact[s]
        };
        let initial_state = initial_raw.map(|s| assign(s, &mut compact)).unwrap_or(0);
        let mut terms: Vec<Term> = Vec::new();
        for t in &raw_terms {
            if live(t.source) && live(t.target) {
                let source = assign(t.source, &mut compact);
                let target = assign(t.target, &mut compact);
                terms.push(Term { target, source, link: t.link });
            }
        }
        let outputs = raw_outputs
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&s| (live(s) && compact[s] != usize::MAX).then(|| compact[s]))
                    .collect()
            })
            .collect();
        terms.sort_by_key(|t| (t.target, t.link));

        Ok(LadderPlan {
            color_pulses,
            links,
            terms,
            states: next.max(1),
            initial_state,
            outputs,
        })
    }

    fn run(
        &self,
        system: &LevelSystem<T>,
        field: &TwoColorField<T>,
        grid: &TimeGrid<T>,
    ) -> Result<Vec<Vec<Complex<T>>>> {
        let zero = Complex::new(T::zero(), T::zero());
        let h = grid.effective_dt();
        let omegas = system.angular_energies();

        // Only links that appear in live terms matter for the step check.
        let mut used = vec![false; self.links.len()];
        for t in &self.terms {
            used[t.link] = true;
        }
        for (li, link) in self.links.iter().enumerate() {
            if !used[li] {
                continue;
            }
            let pulse = &field.pulses[self.color_pulses[link.color]];
            let detuning = omegas[link.target_level] - omegas[link.source_level] - pulse.omega();
            let phase = (detuning * h).abs();
            if phase > T::lit(MAX_PHASE_PER_STEP) {
                return Err(Error::GridTooCoarse {
                    dt: h.as_f64(),
                    phase_per_step: phase.as_f64(),
                    limit: MAX_PHASE_PER_STEP,
                });
            }
        }
        for &pi in &self.color_pulses {
            let fwhm = field.pulses[pi].fwhm;
            if h * T::lit(MIN_STEPS_PER_FWHM) > fwhm {
                return Err(Error::GridTooCoarse {
                    dt: h.as_f64(),
                    phase_per_step: 0.0,
                    limit: MAX_PHASE_PER_STEP,
                });
            }
        }

        let ladder_field = TwoColorField {
            pulses: self
                .color_pulses
                .iter()
                .map(|&i| field.pulses[i].clone())
                .collect(),
        };
        let mut sampler = StepSampler::new(omegas, &ladder_field, h);
        let n = self.states;
        let mut a = vec![zero; n];
        a[self.initial_state] = Complex::new(T::one(), T::zero());
        let mut k1 = vec![zero; n];
        let mut k2 = vec![zero; n];
        let mut k3 = vec![zero; n];
        let mut k4 = vec![zero; n];
        let mut tmp = vec![zero; n];
        let nlinks = self.links.len();
        let mut gains: [Vec<Complex<T>>; 3] = [vec![zero; nlinks], vec![zero; nlinks], vec![zero; nlinks]];

        let inv_hbar = T::one() / UnitSystem::hbar::<T>();
        let i_over_hbar = Complex::new(T::zero(), inv_hbar);
        let two = T::lit(2.0);
        let half_h = h * T::lit(0.5);
        let sixth_h = h / T::lit(6.0);
        let tiny = T::min_positive_value();
        let terms = &self.terms;
        let initial_state = self.initial_state;

        for step in 0..grid.steps() {
            let t = grid.t_start + h * T::from_usize_lossy(step);
            sampler.sample(t);
            let s = &sampler.samples;
            let quiet = (0..3).all(|j| s.eplus[j].iter().all(|e| e.norm_sqr() <= tiny));
            if quiet {
                continue;
            }
            for j in 0..3 {
                for (li, link) in self.links.iter().enumerate() {
                    if !used[li] {
                        continue;
                    }
                    let ph = s.phases[j][link.target_level] * s.phases[j][link.source_level].conj();
                    gains[j][li] = i_over_hbar * ph * s.eplus[j][link.color] * link.dipole;
                }
            }
            let deriv = |j: usize, y: &[Complex<T>], out: &mut [Complex<T>]| {
                out.iter_mut().for_each(|o| *o = zero);
                let g = &gains[j];
                for term in terms {
                    out[term.target] += g[term.link] * y[term.source];
                }
            };
            deriv(0, &a, &mut k1);
            for m in 0..n {
                tmp[m] = a[m] + k1[m] * half_h;
            }
            deriv(1, &tmp, &mut k2);
            for m in 0..n {
                tmp[m] = a[m] + k2[m] * half_h;
            }
            deriv(1, &tmp, &mut k3);
            for m in 0..n {
                tmp[m] = a[m] + k3[m] * h;
            }
            deriv(2, &tmp, &mut k4);
            for m in 0..n {
                if m != initial_state {
                    a[m] += (k1[m] + (k2[m] + k3[m]) * two + k4[m]) * sixth_h;
                }
            }
        }

        Ok(self
            .outputs
            .iter()
            .map(|row| row.iter().map(|s| s.map(|s| a[s]).unwrap_or(zero)).collect())
            .collect())
    }
}
