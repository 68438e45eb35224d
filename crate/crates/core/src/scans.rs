//! Experiment campaigns: intensity, polarization, delay and fringe scans.
//!
//! Every campaign evaluates three signals per axis point: the fundamental-only
//! probability `p_w`, the harmonic-only probability `p_2w` and the two-color
//! total. Points are evaluated in parallel and assembled in axis order.

use std::collections::BTreeMap;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    extract_fringe_period, fit_cos_exponent, fit_loglog_slope, fit_sinusoid, peak_stats,
    FringeEstimate,
};
use crate::dyson::{
    additivity, additivity_closed_form, additivity_coefficients, additivity_maxima,
    channel_amplitudes, fringe_pattern, fringe_period, visibility, ChannelSpec, ColorDrive,
    FringeParams, Overlap,
};
use crate::error::{Error, Result};
use crate::grid::{TimeGrid, DEFAULT_PADDING_FWHM};
use crate::levels::{FinalStates, LevelSystem};
use crate::pulse::{PulseSpec, TwoColorField};
use crate::scalar::Real;
use crate::tdse::{emission_probability, propagate};
use crate::units::{photon_energy, two_color_intensity, TipSpec};

/// Any single-channel probability above this flags perturbation breakdown.
pub const DEFAULT_REGIME_THRESHOLD: f64 = 0.1;

/// Intensity scans must span at least this many decades.
pub const MIN_INTENSITY_DECADES: f64 = 0.8;

/// Reference intensity (W/cm²) of the scaling engine's relative units.
pub const SCALING_REFERENCE_INTENSITY: f64 = 1e11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Intensity,
    Polarization,
    Delay,
    Fringe,
}

impl ScanKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScanKind::Intensity => "intensity",
            ScanKind::Polarization => "polarization",
            ScanKind::Delay => "delay",
            ScanKind::Fringe => "fringe",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "intensity" => Ok(ScanKind::Intensity),
            "polarization" => Ok(ScanKind::Polarization),
            "delay" => Ok(ScanKind::Delay),
            "fringe" => Ok(ScanKind::Fringe),
            _ => Err(Error::config(format!(
                "scan.kind `{s}` not one of intensity, polarization, delay, fringe"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Tdse,
    Dyson,
    /// Closed-form scaling laws.
    Scaling,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Tdse => "tdse",
            Engine::Dyson => "dyson",
            Engine::Scaling => "scaling",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tdse" => Ok(Engine::Tdse),
            "dyson" => Ok(Engine::Dyson),
            "scaling" | "closed-form" | "closed_form" => Ok(Engine::Scaling),
            _ => Err(Error::config(format!("engine `{s}` not one of tdse, dyson, scaling"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

impl Spacing {
    pub fn as_str(&self) -> &'static str {
        match self {
            Spacing::Linear => "linear",
            Spacing::Log => "log",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Spacing::Linear),
            "log" => Ok(Spacing::Log),
            _ => Err(Error::config(format!("scan.spacing `{s}` not one of linear, log"))),
        }
    }
}

/// How the harmonic intensity follows the fundamental in an intensity scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Locus {
    /// `(s I_ω, s I_2ω)`: fixed intensity ratio.
    FixedRatio,
    /// `(s I_ω, s² I_2ω)`: every channel scales as `s⁴`.
    Additivity,
}

impl Locus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Locus::FixedRatio => "fixed_ratio",
            Locus::Additivity => "additivity",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fixed_ratio" => Ok(Locus::FixedRatio),
            "additivity" => Ok(Locus::Additivity),
            _ => Err(Error::config(format!("scan.locus `{s}` not one of fixed_ratio, additivity"))),
        }
    }

    fn harmonic_power(&self) -> i32 {
        match self {
            Locus::FixedRatio => 1,
            Locus::Additivity => 2,
        }
    }
}

/// Scan axis. Intensity axes are scale factors applied to the base pulses,
/// polarization axes are degrees, delay axes fs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSpec<T> {
    pub start: T,
    pub stop: T,
    pub points: usize,
    pub spacing: Spacing,
}

impl<T: Real> AxisSpec<T> {
    pub fn linear(start: T, stop: T, points: usize) -> Self {
        AxisSpec { start, stop, points, spacing: Spacing::Linear }
    }

    pub fn log(start: T, stop: T, points: usize) -> Self {
        AxisSpec { start, stop, points, spacing: Spacing::Log }
    }

    pub fn values(&self) -> Vec<T> {
        let n = self.points;
        if n == 1 {
            return vec![self.start];
        }
        let last = T::from_usize_lossy(n - 1);
        (0..n)
            .map(|k| {
                let f = T::from_usize_lossy(k) / last;
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * f,
                    Spacing::Log => self.start * (self.stop / self.start).powf(f),
                }
            })
            .collect()
    }

    pub fn step(&self) -> T {
        if self.points < 2 {
            return T::zero();
        }
        (self.stop - self.start) / T::from_usize_lossy(self.points - 1)
    }
}

/// Which pulse labels play the fundamental and harmonic roles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub fundamental: String,
    pub harmonic: String,
}

/// The three campaign channels. The harmonic channel may be absent when the
/// two-photon harmonic signal is negligible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub fundamental: ChannelSpec,
    pub harmonic: Option<ChannelSpec>,
    pub multicolor: ChannelSpec,
}

impl ChannelSet {
    pub fn standard(roles: &Roles) -> Self {
        let f = roles.fundamental.as_str();
        let h = roles.harmonic.as_str();
        ChannelSet {
            fundamental: ChannelSpec::single(f, 4).expect("nonzero"),
            harmonic: Some(ChannelSpec::single(h, 2).expect("nonzero")),
            multicolor: ChannelSpec::new([(f, 2), (h, 1)]).expect("nonzero"),
        }
    }

    pub fn list(&self) -> Vec<ChannelSpec> {
        let mut v = vec![self.fundamental.clone()];
        if let Some(h) = &self.harmonic {
            v.push(h.clone());
        }
        v.push(self.multicolor.clone());
        v
    }
}

/// Relative channel strengths for the scaling engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingModel<T> {
    pub strength_fundamental: T,
    pub strength_harmonic: T,
    pub strength_multicolor: T,
}

impl<T: Real> Default for ScalingModel<T> {
    fn default() -> Self {
        ScalingModel {
            strength_fundamental: T::one(),
            strength_harmonic: T::one(),
            strength_multicolor: T::one(),
        }
    }
}

/// Sub-cycle check for fringes inside a delay scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubScan<T> {
    pub center: T,
    pub span: T,
    /// Samples per expected fringe period.
    pub samples_per_period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig<T> {
    pub kind: ScanKind,
    pub axis: AxisSpec<T>,
    pub field: TwoColorField<T>,
    pub system: LevelSystem<T>,
    pub engine: Engine,
    pub background_subtraction: bool,
    pub roles: Roles,
    pub channels: ChannelSet,
    /// Pulse swept by polarization, delay and fringe scans.
    pub sweep_color: String,
    pub locus: Locus,
    pub scaling: ScalingModel<T>,
    /// Propagation step in fs; `None` uses [`TimeGrid::default_dt_for`].
    pub dt: Option<T>,
    pub padding_fwhm: T,
    pub regime_threshold: T,
    pub subscan: Option<SubScan<T>>,
    pub tip: TipSpec<T>,
    /// Laser repetition rate in Hz; adds electron-rate columns when set.
    pub repetition_rate: Option<T>,
}

/// Shorthand labels of the ω/2ω experiment.
pub const OMEGA: &str = "omega";
pub const TWO_OMEGA: &str = "two_omega";
/// Shorthand labels of the ν/2ν experiment.
pub const NU: &str = "nu";
pub const TWO_NU: &str = "two_nu";

/// Default detuning (eV) of the polycrystalline virtual ladder.
pub const POLY_DETUNING_EV: f64 = 0.1;
/// Default harmonic-ladder dipole (e·nm) of the polycrystalline preset, set so
/// the three channels are comparable at the experimental intensities.
pub const POLY_HARMONIC_DIPOLE: f64 = 0.0035;
/// Default dipole element (e·nm) of the scan presets.
pub const PRESET_DIPOLE: f64 = 0.01;

impl<T: Real> ScanConfig<T> {
    /// The ω/2ω polycrystalline experiment: 800 nm at 6.7×10¹¹ W/cm², 400 nm
    /// at 2.2×10¹⁰ W/cm², 100 fs / 400 fs, polarizations +48° / −64°.
    pub fn polycrystalline(kind: ScanKind) -> Self {
        let field = TwoColorField::new(vec![
            PulseSpec::new(OMEGA, T::lit(800.0), T::lit(6.7e11), T::lit(100.0))
                .with_polarization(T::lit(48.0)),
            PulseSpec::new(TWO_OMEGA, T::lit(400.0), T::lit(2.2e10), T::lit(400.0))
                .with_polarization(T::lit(-64.0)),
        ]);
        let fe = photon_energy(T::lit(800.0)).expect("positive");
        let he = photon_energy(T::lit(400.0)).expect("positive");
        let d = T::lit(PRESET_DIPOLE);
        let system = LevelSystem::polycrystalline(
            fe,
            he,
            T::lit(POLY_DETUNING_EV),
            d,
            T::lit(POLY_HARMONIC_DIPOLE),
        );
        let roles = Roles { fundamental: OMEGA.into(), harmonic: TWO_OMEGA.into() };
        let axis = match kind {
            ScanKind::Intensity => AxisSpec::log(T::lit(0.1), T::one(), 10),
            ScanKind::Polarization => AxisSpec::linear(T::lit(-90.0), T::lit(90.0), 37),
            ScanKind::Delay => AxisSpec::linear(T::lit(-1000.0), T::lit(1000.0), 201),
            ScanKind::Fringe => AxisSpec::linear(T::lit(-20.0), T::lit(20.0), 493),
        };
        let subscan = (kind == ScanKind::Delay).then(|| SubScan {
            center: T::zero(),
            span: T::lit(40.0),
            samples_per_period: 16,
        });
        ScanConfig {
            kind,
            axis,
            field,
            system,
            engine: Engine::Dyson,
            background_subtraction: true,
            channels: ChannelSet::standard(&roles),
            sweep_color: OMEGA.into(),
            roles,
            locus: Locus::FixedRatio,
            scaling: ScalingModel::default(),
            dt: None,
            padding_fwhm: T::lit(DEFAULT_PADDING_FWHM),
            regime_threshold: T::lit(DEFAULT_REGIME_THRESHOLD),
            subscan,
            tip: TipSpec::tungsten_default(),
            repetition_rate: None,
        }
    }

    /// The ν/2ν single-crystal experiment with a shared final level:
    /// 1560 nm + 780 nm, both 100 fs, four-photon and multicolor channels only.
    pub fn shared_final(kind: ScanKind) -> Self {
        let mut cfg = Self::polycrystalline(kind);
        cfg.field = TwoColorField::new(vec![
            PulseSpec::new(NU, T::lit(1560.0), T::lit(W310_NU_INTENSITY), T::lit(100.0)),
            PulseSpec::new(TWO_NU, T::lit(780.0), T::lit(W310_TWO_NU_INTENSITY), T::lit(100.0)),
        ]);
        let fe = photon_energy(T::lit(1560.0)).expect("positive");
        let d = T::lit(PRESET_DIPOLE);
        cfg.system = LevelSystem::shared_final_ladder(fe, d, d);
        cfg.roles = Roles { fundamental: NU.into(), harmonic: TWO_NU.into() };
        cfg.channels = ChannelSet {
            fundamental: ChannelSpec::single(NU, 4).expect("nonzero"),
            harmonic: None,
            multicolor: ChannelSpec::new([(NU, 2), (TWO_NU, 1)]).expect("nonzero"),
        };
        cfg.sweep_color = NU.into();
        if kind == ScanKind::Fringe {
            let period = fringe_period(cfg.fundamental().omega());
            let step = period / T::lit(16.0);
            let half = (T::lit(20.0) / step).round().to_usize().unwrap_or(1);
            let reach = step * T::from_usize_lossy(half);
            cfg.axis = AxisSpec::linear(-reach, reach, 2 * half + 1);
        }
        cfg.subscan = None;
        cfg
    }

    pub fn fundamental(&self) -> &PulseSpec<T> {
        self.field.get(&self.roles.fundamental).expect("validated roles")
    }

    pub fn harmonic(&self) -> Option<&PulseSpec<T>> {
        self.field.get(&self.roles.harmonic)
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.field.validate_distinct_colors()?;
        self.system.validate()?;
        self.tip.validate()?;
        for label in [&self.roles.fundamental, &self.roles.harmonic, &self.sweep_color] {
            if self.field.get(label).is_none() {
                return Err(Error::config(format!("role color `{label}` has no pulse")));
            }
        }
        for ch in self.channels.list() {
            ch.validate_against(&self.field)?;
        }
        let min_points = match self.kind {
            ScanKind::Intensity | ScanKind::Polarization => 5,
            ScanKind::Delay | ScanKind::Fringe => 3,
        };
        if self.axis.points < min_points {
            return Err(Error::config(format!(
                "scan.points >= {min_points} violated for a {} scan",
                self.kind.as_str()
            )));
        }
        if !(self.axis.start < self.axis.stop) {
            return Err(Error::config("scan.start < scan.stop violated"));
        }
        if self.axis.spacing == Spacing::Log && !(self.axis.start > T::zero()) {
            return Err(Error::config("log spacing needs scan.start > 0"));
        }
        match self.kind {
            ScanKind::Intensity => {
                if !(self.axis.start > T::zero()) {
                    return Err(Error::config("intensity scale factors must be > 0"));
                }
                let decades = (self.axis.stop / self.axis.start).log10();
                if !(decades >= T::lit(MIN_INTENSITY_DECADES) - T::lit(1e-9)) {
                    return Err(Error::config(format!(
                        "intensity scans must span >= {MIN_INTENSITY_DECADES} decades"
                    )));
                }
            }
            ScanKind::Polarization => {
                if self.axis.start < T::lit(-90.0) || self.axis.stop > T::lit(90.0) {
                    return Err(Error::config("|polarization_angle| <= 90 violated by the axis"));
                }
            }
            ScanKind::Fringe => {
                let period = fringe_period(self.field.get(&self.sweep_color).expect("checked").omega());
                if self.axis.step() > period / T::lit(8.0) {
                    return Err(Error::config(format!(
                        "fringe resolution {} fs coarser than period/8 = {} fs",
                        self.axis.step(),
                        period / T::lit(8.0)
                    )));
                }
            }
            ScanKind::Delay => {}
        }
        if let Some(dt) = self.dt {
            if !(dt > T::zero()) {
                return Err(Error::config("grid.dt_fs > 0 violated"));
            }
        }
        if !(self.padding_fwhm > T::zero()) {
            return Err(Error::config("grid.padding_fwhm > 0 violated"));
        }
        if let Some(s) = &self.subscan {
            if !(s.span > T::zero()) || s.samples_per_period < 8 {
                return Err(Error::config("subscan needs span > 0 and >= 8 samples per period"));
            }
        }
        if let Some(r) = self.repetition_rate {
            if !(r > T::zero()) {
                return Err(Error::config("repetition_rate_hz > 0 violated"));
            }
        }
        Ok(())
    }

    fn grid_for(&self, field: &TwoColorField<T>) -> Result<TimeGrid<T>> {
        let dt = self.dt.unwrap_or_else(|| TimeGrid::default_dt_for(&self.field, &self.system));
        TimeGrid::covering(field, dt, self.padding_fwhm)
    }
}

/// Default ν intensity (W/cm²) of the shared-final-level scenario.
pub const W310_NU_INTENSITY: f64 = 1e9;
/// Default 2ν intensity (W/cm²) of the shared-final-level scenario.
pub const W310_TWO_NU_INTENSITY: f64 = 1e9;

/// Probabilities at one scan point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSignals<T> {
    pub p_w: T,
    pub p_2w: T,
    pub p_total: T,
    /// Channel-resolved multicolor probability where the engine provides it.
    pub p_multi: Option<T>,
    /// Largest single-channel probability, for the regime check.
    pub max_channel: T,
}

impl<T: Real> PointSignals<T> {
    pub fn bgsub(&self) -> T {
        self.p_total - self.p_w - self.p_2w
    }

    pub fn additivity(&self) -> T {
        additivity(self.p_w, self.p_2w, self.p_total).unwrap_or_else(|_| T::nan())
    }
}

/// Channel amplitudes per final level from the perturbative engines.
struct Amplitudes<T> {
    /// `[channel][final]`, channels ordered fundamental, harmonic?, multicolor.
    values: Vec<Vec<Complex<T>>>,
    has_harmonic: bool,
}

impl<T: Real> Amplitudes<T> {
    fn combine(&self, model: FinalStates) -> PointSignals<T> {
        let prob = |row: &Vec<Complex<T>>| row.iter().map(|c| c.norm_sqr()).sum::<T>();
        let p_w = prob(&self.values[0]);
        let p_2w = if self.has_harmonic { prob(&self.values[1]) } else { T::zero() };
        let p_m = prob(self.values.last().expect("multicolor"));
        let p_total = match model {
            FinalStates::Distinct => p_w + p_2w + p_m,
            FinalStates::Shared => {
                let nf = self.values[0].len();
                (0..nf)
                    .map(|f| {
                        self.values
                            .iter()
                            .map(|row| row[f])
                            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
                            .norm_sqr()
                    })
                    .sum()
            }
        };
        PointSignals {
            p_w,
            p_2w,
            p_total,
            p_multi: Some(p_m),
            max_channel: p_w.max(p_2w).max(p_m),
        }
    }
}

struct Evaluator<'a, T> {
    cfg: &'a ScanConfig<T>,
}

impl<'a, T: Real> Evaluator<'a, T> {
    fn amplitudes(&self, field: &TwoColorField<T>) -> Result<Amplitudes<T>> {
        let cfg = self.cfg;
        let channels = cfg.channels.list();
        let has_harmonic = cfg.channels.harmonic.is_some();
        let nf = cfg.system.final_indices.len();
        let values = match cfg.engine {
            Engine::Dyson => {
                let grid = cfg.grid_for(field)?;
                let flat = channel_amplitudes(&cfg.system, field, &channels, &grid)?;
                flat.chunks(nf).map(|c| c.iter().map(|a| a.value).collect()).collect()
            }
            Engine::Scaling => {
                let primary = |ch: &ChannelSpec| -> usize {
                    // Distinct finals: one per channel in channel order.
                    match cfg.system.final_states {
                        FinalStates::Shared => 0,
                        FinalStates::Distinct => {
                            let idx = channels.iter().position(|c| c == ch).unwrap_or(0);
                            idx.min(nf - 1)
                        }
                    }
                };
                let strengths: Vec<T> = {
                    let mut s = vec![cfg.scaling.strength_fundamental];
                    if has_harmonic {
                        s.push(cfg.scaling.strength_harmonic);
                    }
                    s.push(cfg.scaling.strength_multicolor);
                    s
                };
                let mut rows = Vec::with_capacity(channels.len());
                for (ch, &k) in channels.iter().zip(&strengths) {
                    let mut row = vec![Complex::new(T::zero(), T::zero()); nf];
                    row[primary(ch)] = self.scaling_amplitude(ch, k, field)?;
                    rows.push(row);
                }
                rows
            }
            Engine::Tdse => return Err(Error::config("tdse engine has no channel amplitudes")),
        };
        Ok(Amplitudes { values, has_harmonic })
    }

    fn scaling_amplitude(&self, ch: &ChannelSpec, strength: T, field: &TwoColorField<T>) -> Result<Complex<T>> {
        let cfg = self.cfg;
        let iref = T::lit(SCALING_REFERENCE_INTENSITY);
        let drives: Vec<ColorDrive<T>> = field
            .pulses
            .iter()
            .map(|p| ColorDrive::new(p.label.clone(), p.peak_intensity / iref, p.polarization_angle))
            .collect();
        let magnitude = (strength * crate::dyson::scaling_probability(ch, &drives)?).sqrt();
        let g = if ch.counts().len() > 1 {
            let f = field.get(&cfg.roles.fundamental).expect("validated");
            let h = field.get(&cfg.roles.harmonic).expect("validated");
            Overlap::gaussian_for(f.fwhm, h.fwhm).at(f.delay - h.delay)
        } else {
            T::one()
        };
        Ok(Complex::from_polar(magnitude * g, ch.delay_phase(field)?))
    }

    fn tdse(&self, field: &TwoColorField<T>) -> Result<T> {
        if field.pulses.is_empty() {
            return Ok(T::zero());
        }
        let grid = self.cfg.grid_for(field)?;
        let state = propagate(&self.cfg.system, field, &grid)?;
        Ok(emission_probability(&state, &self.cfg.system))
    }

    fn single_color(&self, field: &TwoColorField<T>, label: &str) -> TwoColorField<T> {
        field.only(&[label])
    }

    /// Signals at one field configuration. `refs` supplies precomputed
    /// single-color tdse references when they do not vary along the axis.
    fn signals(&self, field: &TwoColorField<T>, refs: Option<(T, T)>) -> Result<PointSignals<T>> {
        let cfg = self.cfg;
        match cfg.engine {
            Engine::Tdse => {
                let (p_w, p_2w) = match refs {
                    Some(r) => r,
                    None => self.tdse_refs(field)?,
                };
                let p_total = self.tdse(field)?;
                Ok(PointSignals { p_w, p_2w, p_total, p_multi: None, max_channel: p_w.max(p_2w) })
            }
            _ => Ok(self.amplitudes(field)?.combine(cfg.system.final_states)),
        }
    }

    fn tdse_refs(&self, field: &TwoColorField<T>) -> Result<(T, T)> {
        let cfg = self.cfg;
        let p_w = self.tdse(&self.single_color(field, &cfg.roles.fundamental))?;
        let p_2w = if cfg.channels.harmonic.is_some() {
            self.tdse(&self.single_color(field, &cfg.roles.harmonic))?
        } else {
            T::zero()
        };
        Ok((p_w, p_2w))
    }
}

/// One named column of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column<T> {
    pub name: String,
    pub values: Vec<T>,
}

/// A derived quantity and its fit residual, where one applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Derived<T> {
    pub value: T,
    pub residual: Option<T>,
}

/// Auxiliary table (e.g. a fringe sub-scan) attached to a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series<T> {
    pub name: String,
    pub columns: Vec<Column<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMetadata {
    pub tool_version: String,
    pub kind: ScanKind,
    pub engine: Engine,
    pub final_states: FinalStates,
    pub channels: Vec<String>,
    pub grid_dt_fs: f64,
    pub padding_fwhm: f64,
    /// Canonical configuration text.
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult<T> {
    /// First column is the axis.
    pub columns: Vec<Column<T>>,
    pub derived: BTreeMap<String, Derived<T>>,
    pub series: Vec<Series<T>>,
    pub warnings: Vec<String>,
    pub metadata: ScanMetadata,
}

impl<T: Real> ScanResult<T> {
    pub fn axis(&self) -> &Column<T> {
        &self.columns[0]
    }

    pub fn column(&self, name: &str) -> Option<&[T]> {
        self.columns.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    pub fn derived_value(&self, name: &str) -> Option<T> {
        self.derived.get(name).map(|d| d.value)
    }

    pub fn series(&self, name: &str) -> Option<&Series<T>> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map(|c| c.values.len()).unwrap_or(0)
    }
}

struct Builder<T> {
    columns: Vec<Column<T>>,
    derived: BTreeMap<String, Derived<T>>,
    series: Vec<Series<T>>,
    warnings: Vec<String>,
}

impl<T: Real> Builder<T> {
    fn new() -> Self {
        Builder { columns: Vec::new(), derived: BTreeMap::new(), series: Vec::new(), warnings: Vec::new() }
    }

    fn column(&mut self, name: &str, values: Vec<T>) {
        self.columns.push(Column { name: name.into(), values });
    }

    fn derive(&mut self, name: &str, value: T, residual: Option<T>) {
        self.derived.insert(name.into(), Derived { value, residual });
    }

    fn signal_columns(&mut self, cfg: &ScanConfig<T>, sig: &[PointSignals<T>]) {
        self.column("p_w", sig.iter().map(|s| s.p_w).collect());
        self.column("p_2w", sig.iter().map(|s| s.p_2w).collect());
        self.column("p_total", sig.iter().map(|s| s.p_total).collect());
        if cfg.background_subtraction {
            self.column("p_multicolor_bgsub", sig.iter().map(|s| s.bgsub()).collect());
        }
        self.column("additivity", sig.iter().map(|s| s.additivity()).collect());
        if let Some(rate) = cfg.repetition_rate {
            self.column("rate_total_per_s", sig.iter().map(|s| s.p_total * rate).collect());
        }
        // Scaling-engine probabilities are relative, so no regime check there.
        let worst = sig.iter().map(|s| s.max_channel).fold(T::zero(), T::max);
        if cfg.engine != Engine::Scaling && worst > cfg.regime_threshold {
            self.warnings.push(format!(
                "perturbation breakdown: single-channel probability {} exceeds {}",
                worst, cfg.regime_threshold
            ));
        }
    }

    fn finish(self, cfg: &ScanConfig<T>) -> ScanResult<T> {
        let dt = cfg.dt.unwrap_or_else(|| TimeGrid::default_dt_for(&cfg.field, &cfg.system));
        ScanResult {
            columns: self.columns,
            derived: self.derived,
            series: self.series,
            warnings: self.warnings,
            metadata: ScanMetadata {
                tool_version: env!("CARGO_PKG_VERSION").into(),
                kind: cfg.kind,
                engine: cfg.engine,
                final_states: cfg.system.final_states,
                channels: cfg.channels.list().iter().map(|c| c.to_string()).collect(),
                grid_dt_fs: dt.as_f64(),
                padding_fwhm: cfg.padding_fwhm.as_f64(),
                config: crate::io::config::serialize_config(cfg),
            },
        }
    }
}

/// Signal used for the multicolor channel: background-subtracted when
/// enabled, raw two-color total otherwise.
fn multicolor_signal<T: Real>(cfg: &ScanConfig<T>, s: &PointSignals<T>) -> T {
    if cfg.background_subtraction {
        s.bgsub()
    } else {
        s.p_total
    }
}

fn evaluate_all<T: Real>(
    cfg: &ScanConfig<T>,
    fields: &[TwoColorField<T>],
    refs: Option<(T, T)>,
) -> Result<Vec<PointSignals<T>>> {
    let ev = Evaluator { cfg };
    fields.par_iter().map(|f| ev.signals(f, refs)).collect()
}

fn require(cfg_kind: ScanKind, want: ScanKind) -> Result<()> {
    if cfg_kind != want {
        return Err(Error::config(format!(
            "scan.kind is `{}`, expected `{}`",
            cfg_kind.as_str(),
            want.as_str()
        )));
    }
    Ok(())
}

/// Sweeps intensity along the configured locus.
pub fn run_intensity_scan<T: Real>(cfg: &ScanConfig<T>) -> Result<ScanResult<T>> {
    require(cfg.kind, ScanKind::Intensity)?;
    cfg.validate()?;
    let scales = cfg.axis.values();
    let f0 = cfg.fundamental().peak_intensity;
    let h0 = cfg.harmonic().map(|h| h.peak_intensity).unwrap_or_else(T::zero);
    let power = cfg.locus.harmonic_power();
    let fields: Vec<TwoColorField<T>> = scales
        .iter()
        .map(|&s| {
            let mut f = cfg.field.clone();
            f.get_mut(&cfg.roles.fundamental).expect("validated").peak_intensity = f0 * s;
            if let Some(h) = f.get_mut(&cfg.roles.harmonic) {
                h.peak_intensity = h0 * s.powi(power);
            }
            f
        })
        .collect();
    let sig = evaluate_all(cfg, &fields, None)?;

    let iw: Vec<T> = scales.iter().map(|&s| f0 * s).collect();
    let i2w: Vec<T> = scales.iter().map(|&s| h0 * s.powi(power)).collect();
    let iww: Vec<T> = iw.iter().zip(&i2w).map(|(&a, &b)| two_color_intensity(a, b)).collect();

    let mut b = Builder::new();
    b.column("intensity_scale", scales.clone());
    b.column("i_w_w_cm2", iw.clone());
    b.column("i_2w_w_cm2", i2w.clone());
    b.column("i_w2w_w_cm2", iww.clone());
    b.signal_columns(cfg, &sig);

    let fits = [
        ("slope_fundamental", &iw, sig.iter().map(|s| s.p_w).collect::<Vec<_>>()),
        ("slope_harmonic", &i2w, sig.iter().map(|s| s.p_2w).collect()),
        ("slope_multicolor", &iww, sig.iter().map(|s| multicolor_signal(cfg, s)).collect()),
    ];
    for (name, xs, ys) in fits {
        match fit_loglog_slope(xs, &ys) {
            Ok(fit) => b.derive(name, fit.slope, Some(fit.max_relative_residual)),
            Err(e) => b.warnings.push(format!("{name}: {e}")),
        }
    }
    let adds: Vec<T> = sig.iter().map(|s| s.additivity()).collect();
    if adds.iter().all(|a| a.is_finite()) {
        let mean = adds.iter().copied().sum::<T>() / T::from_usize_lossy(adds.len());
        let spread = adds.iter().map(|a| (*a - mean).abs()).fold(T::zero(), T::max);
        b.derive("additivity_mean", mean, Some(spread));
        let rel = if mean != T::zero() { spread / mean.abs() } else { spread };
        b.derive("additivity_relative_variation", rel, None);
    }
    Ok(b.finish(cfg))
}

/// Sweeps the polarization angle of `sweep_color`.
pub fn run_polarization_scan<T: Real>(cfg: &ScanConfig<T>) -> Result<ScanResult<T>> {
    require(cfg.kind, ScanKind::Polarization)?;
    cfg.validate()?;
    let angles = cfg.axis.values();
    let fields: Vec<TwoColorField<T>> = angles
        .iter()
        .map(|&a| {
            let mut f = cfg.field.clone();
            f.get_mut(&cfg.sweep_color).expect("validated").polarization_angle = a;
            f
        })
        .collect();
    let sig = evaluate_all(cfg, &fields, None)?;

    let mut b = Builder::new();
    b.column("theta_deg", angles.clone());
    b.signal_columns(cfg, &sig);

    let multi: Vec<T> = sig.iter().map(|s| multicolor_signal(cfg, s)).collect();
    let sweeping_fundamental = cfg.sweep_color == cfg.roles.fundamental;
    let fits: Vec<(&str, Vec<T>)> = if sweeping_fundamental {
        vec![
            ("exponent_fundamental", sig.iter().map(|s| s.p_w).collect()),
            ("exponent_multicolor", multi.clone()),
        ]
    } else {
        vec![
            ("exponent_harmonic", sig.iter().map(|s| s.p_2w).collect()),
            ("exponent_multicolor", multi.clone()),
        ]
    };
    for (name, ys) in &fits {
        match fit_cos_exponent(&angles, ys) {
            Ok(fit) => b.derive(name, fit.exponent, Some(fit.max_relative_residual)),
            Err(e) => b.warnings.push(format!("{name}: {e}")),
        }
    }
    b.derive("symmetry_multicolor", mirror_asymmetry(&angles, &multi), None);

    // Closed-form additivity from the on-axis channel values.
    let zero = angles
        .iter()
        .position(|a| a.abs() <= T::lit(1e-9))
        .map(|k| sig[k]);
    if let (true, Some(z)) = (sweeping_fundamental, zero) {
        let pm0 = z.p_multi.unwrap_or_else(|| z.bgsub());
        if let Ok((c1, c2)) = additivity_coefficients(z.p_w, z.p_2w, pm0) {
            b.derive("c1", c1, None);
            b.derive("c2", c2, None);
            b.column(
                "additivity_closed_form",
                angles.iter().map(|&a| additivity_closed_form(a, c1, c2)).collect(),
            );
            if let Some(m) = additivity_maxima(c1, c2) {
                b.derive("additivity_max_theta_deg", m.theta_deg, None);
                b.derive("additivity_max", m.value, None);
            }
        }
    }
    Ok(b.finish(cfg))
}

/// `max |y(θ) − y(−θ)| / max |y|` over mirrored axis pairs.
pub fn mirror_asymmetry<T: Real>(xs: &[T], ys: &[T]) -> T {
    let scale = ys.iter().map(|y| y.abs()).fold(T::zero(), T::max);
    if scale == T::zero() {
        return T::zero();
    }
    let mut worst = T::zero();
    let tol = T::lit(1e-9) * xs.iter().map(|x| x.abs()).fold(T::one(), T::max);
    for (i, &x) in xs.iter().enumerate() {
        if let Some(j) = xs.iter().position(|&y| (y + x).abs() <= tol) {
            worst = worst.max((ys[i] - ys[j]).abs() / scale);
        }
    }
    worst
}

fn with_delay<T: Real>(base: &TwoColorField<T>, label: &str, tau: T) -> TwoColorField<T> {
    let mut f = base.clone();
    f.get_mut(label).expect("validated").delay = tau;
    f
}

/// Sweeps the delay of `sweep_color` and characterizes the overlap peak.
pub fn run_delay_scan<T: Real>(cfg: &ScanConfig<T>) -> Result<ScanResult<T>> {
    require(cfg.kind, ScanKind::Delay)?;
    cfg.validate()?;
    let taus = cfg.axis.values();
    let fields: Vec<TwoColorField<T>> =
        taus.iter().map(|&t| with_delay(&cfg.field, &cfg.sweep_color, t)).collect();
    let ev = Evaluator { cfg };
    // Single-color signals do not depend on the delay.
    let refs = match cfg.engine {
        Engine::Tdse => Some(ev.tdse_refs(&cfg.field)?),
        _ => None,
    };
    let sig = evaluate_all(cfg, &fields, refs)?;

    let mut b = Builder::new();
    b.column("delay_fs", taus.clone());
    b.signal_columns(cfg, &sig);

    let multi: Vec<T> = sig.iter().map(|s| multicolor_signal(cfg, s)).collect();
    match peak_stats(&taus, &multi) {
        Ok(p) => {
            b.derive("peak_center_fs", p.center, None);
            b.derive("peak_height", p.height, None);
            b.derive("peak_fwhm_fs", p.fwhm, None);
        }
        Err(e) => b.warnings.push(format!("peak: {e}")),
    }
    if let Some(h) = cfg.harmonic() {
        let f = cfg.fundamental();
        if let Some(w) = Overlap::gaussian_for(f.fwhm, h.fwhm).probability_fwhm() {
            b.derive("overlap_model_fwhm_fs", w, None);
        }
    }
    if let Some(k) = taus.iter().position(|t| t.abs() <= T::lit(1e-9)) {
        b.derive("additivity_at_zero_delay", sig[k].additivity(), None);
    }

    if let Some(sub) = cfg.subscan {
        let omega = cfg.field.get(&cfg.sweep_color).expect("validated").omega();
        let period = fringe_period(omega);
        let step = period / T::from_usize_lossy(sub.samples_per_period);
        let n = (sub.span / step).floor().to_usize().unwrap_or(0) + 1;
        let start = sub.center - step * T::from_usize_lossy(n - 1) * T::lit(0.5);
        let ts: Vec<T> = (0..n).map(|k| start + step * T::from_usize_lossy(k)).collect();
        let sub_fields: Vec<_> =
            ts.iter().map(|&t| with_delay(&cfg.field, &cfg.sweep_color, t)).collect();
        let sub_sig = evaluate_all(cfg, &sub_fields, refs)?;
        let total: Vec<T> = sub_sig.iter().map(|s| s.p_total).collect();
        let peak = total.iter().copied().fold(T::zero(), T::max);
        let fit = fit_sinusoid(&ts, &total, T::lit(2.0) * omega, 2)?;
        let rel = if peak > T::zero() { fit.amplitude() / peak } else { T::zero() };
        b.derive("subscan_fringe_amplitude_relative", rel, Some(fit.rss.sqrt()));
        let detected = match extract_fringe_period(&ts, &total)? {
            FringeEstimate::Detected { period, prominence, .. } => {
                b.derive("subscan_period_fs", period, None);
                b.derive("subscan_prominence", prominence, None);
                T::one()
            }
            FringeEstimate::NoFringeDetected { prominence } => {
                b.derive("subscan_prominence", prominence, None);
                T::zero()
            }
        };
        b.derive("subscan_fringe_detected", detected, None);
        b.series.push(Series {
            name: "fringe_subscan".into(),
            columns: vec![
                Column { name: "delay_fs".into(), values: ts },
                Column { name: "p_total".into(), values: total },
            ],
        });
    }
    Ok(b.finish(cfg))
}

/// Sub-cycle delay sweep of the interference between the single-color and
/// multicolor channels.
pub fn run_fringe_scan<T: Real>(cfg: &ScanConfig<T>) -> Result<ScanResult<T>> {
    require(cfg.kind, ScanKind::Fringe)?;
    cfg.validate()?;
    if cfg.engine == Engine::Tdse {
        return Err(Error::config("fringe scans need the dyson or scaling engine"));
    }
    let taus = cfg.axis.values();
    let fields: Vec<TwoColorField<T>> =
        taus.iter().map(|&t| with_delay(&cfg.field, &cfg.sweep_color, t)).collect();
    let sig = evaluate_all(cfg, &fields, None)?;

    // Model parameters from the channel amplitudes at the base delay.
    let ev = Evaluator { cfg };
    let base = ev.amplitudes(&with_delay(&cfg.field, &cfg.sweep_color, T::zero()))?;
    let norm = |row: &Vec<Complex<T>>| row.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
    let f_s = norm(&base.values[0]);
    let f_m = norm(base.values.last().expect("multicolor"));
    let f = cfg.fundamental();
    let overlap = match cfg.harmonic() {
        Some(h) => Overlap::gaussian_for(f.fwhm, h.fwhm),
        None => Overlap::Unity,
    };
    let params = FringeParams {
        f_single: f_s,
        f_multi: f_m,
        overlap,
        angular_frequency: cfg.field.get(&cfg.sweep_color).expect("validated").omega(),
    };

    let mut b = Builder::new();
    b.column("delay_fs", taus.clone());
    b.signal_columns(cfg, &sig);
    b.column("fringe_model", taus.iter().map(|&t| fringe_pattern(&params, t)).collect());

    let total: Vec<T> = sig.iter().map(|s| s.p_total).collect();
    match extract_fringe_period(&taus, &total)? {
        FringeEstimate::Detected { period, prominence, .. } => {
            b.derive("period_fs", period, None);
            b.derive("frequency_thz", T::lit(1e3) / period, None);
            b.derive("prominence", prominence, None);
        }
        FringeEstimate::NoFringeDetected { prominence } => {
            b.derive("prominence", prominence, None);
            b.warnings.push("no fringe detected".into());
        }
    }
    // Local contrast over ±2 periods around zero delay.
    let period = fringe_period(params.angular_frequency);
    let window: Vec<usize> = (0..taus.len())
        .filter(|&k| taus[k].abs() <= T::lit(2.0) * period + T::lit(1e-9))
        .collect();
    let wt: Vec<T> = window.iter().map(|&k| taus[k]).collect();
    let wy: Vec<T> = window.iter().map(|&k| total[k]).collect();
    match fit_sinusoid(&wt, &wy, T::lit(2.0) * params.angular_frequency, 2) {
        Ok(fit) => b.derive("visibility", fit.visibility(), Some(fit.rss.sqrt())),
        Err(e) => b.warnings.push(format!("visibility: {e}")),
    }
    if let Ok(v) = visibility(f_s, f_m * params.overlap.at(T::zero())) {
        b.derive("visibility_closed_form", v, None);
    }
    b.derive("f_single", f_s, None);
    b.derive("f_multi", f_m, None);
    b.derive("offset_level", f_s * f_s, None);
    b.derive("model_period_fs", period, None);
    Ok(b.finish(cfg))
}

/// Dispatches on `cfg.kind`.
pub fn run_scan<T: Real>(cfg: &ScanConfig<T>) -> Result<ScanResult<T>> {
    match cfg.kind {
        ScanKind::Intensity => run_intensity_scan(cfg),
        ScanKind::Polarization => run_polarization_scan(cfg),
        ScanKind::Delay => run_delay_scan(cfg),
        ScanKind::Fringe => run_fringe_scan(cfg),
    }
}
