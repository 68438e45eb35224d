//! Sectioned `key = value` configuration (TOML syntax).
//!
//! ```toml
//! [scan]
//! kind = "intensity"
//!
//! [pulse.omega]
//! wavelength_nm = 800
//! intensity_w_cm2 = 6.7e11
//!
//! [pulse.two_omega]
//! wavelength_nm = 400
//! intensity_w_cm2 = 2.2e10
//! ```
//!
//! Sections: `tip`, `pulse.<label>`, `levels`, `scan`, `channels`, `model`,
//! `grid`. Only `scan` and at least one pulse are required.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use toml::{Table, Value};

use crate::dyson::ChannelSpec;
use crate::error::{Error, Result};
use crate::grid::DEFAULT_PADDING_FWHM;
use crate::levels::{FinalStates, LevelSystem};
use crate::pulse::{PulseSpec, TwoColorField};
use crate::scalar::Real;
use crate::scans::{
    AxisSpec, ChannelSet, Engine, Locus, Roles, ScalingModel, ScanConfig, ScanKind, Spacing,
    SubScan, DEFAULT_REGIME_THRESHOLD, POLY_DETUNING_EV, POLY_HARMONIC_DIPOLE, PRESET_DIPOLE,
};
use crate::units::{photon_energy, TipSpec};

/// A parsed configuration and the dotted keys that fell back to defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig<T> {
    pub config: ScanConfig<T>,
    pub defaulted: Vec<String>,
}

const SECTIONS: &[&str] = &["tip", "pulse", "levels", "scan", "channels", "model", "grid"];

struct Section<'a> {
    name: String,
    table: Option<&'a Table>,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(name: impl Into<String>, table: Option<&'a Table>) -> Self {
        Section { name: name.into(), table, used: BTreeSet::new() }
    }

    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn raw(&mut self, k: &str) -> Option<&'a Value> {
        self.used.insert(k.to_string());
        self.table.and_then(|t| t.get(k))
    }

    fn float(&mut self, k: &str) -> Result<Option<f64>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(Error::config(format!("`{}` must be a number", self.key(k)))),
        }
    }

    fn int(&mut self, k: &str) -> Result<Option<usize>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(Error::config(format!("`{}` must be a non-negative integer", self.key(k)))),
        }
    }

    fn string(&mut self, k: &str) -> Result<Option<String>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(Error::config(format!("`{}` must be a string", self.key(k)))),
        }
    }

    fn boolean(&mut self, k: &str) -> Result<Option<bool>> {
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(Error::config(format!("`{}` must be true or false", self.key(k)))),
        }
    }

    fn floats(&mut self, k: &str) -> Result<Option<Vec<f64>>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(i) => Ok(*i as f64),
                    _ => Err(Error::config(format!("`{key}` must hold numbers"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(format!("`{key}` must be an array"))),
        }
    }

    fn matrix(&mut self, k: &str) -> Result<Option<Vec<Vec<f64>>>> {
        let key = self.key(k);
        match self.raw(k) {
            None => Ok(None),
            Some(Value::Array(rows)) => rows
                .iter()
                .map(|r| match r {
                    Value::Array(a) => a
                        .iter()
                        .map(|v| match v {
                            Value::Float(x) => Ok(*x),
                            Value::Integer(i) => Ok(*i as f64),
                            _ => Err(Error::config(format!("`{key}` must hold numbers"))),
                        })
                        .collect(),
                    _ => Err(Error::config(format!("`{key}` must be an array of arrays"))),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(Error::config(format!("`{key}` must be an array of arrays"))),
        }
    }

    /// Errors on the first key nobody asked for.
    fn finish(self) -> Result<()> {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.used.contains(k) {
                    return Err(Error::UnknownKey(self.key(k)));
                }
            }
        }
        Ok(())
    }
}

struct Defaults {
    keys: Vec<String>,
}

impl Defaults {
    fn or<V>(&mut self, sec: &Section<'_>, k: &str, v: Option<V>, fallback: V) -> V {
        match v {
            Some(v) => v,
            None => {
                self.keys.push(sec.key(k));
                fallback
            }
        }
    }
}

fn sub_table<'a>(root: &'a Table, name: &str) -> Result<Option<&'a Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(_) => Err(Error::config(format!("`{name}` must be a section"))),
    }
}

/// Parses and validates a configuration.
pub fn parse_config<T: Real>(text: &str) -> Result<ParsedConfig<T>> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(format!("syntax: {}", e.message())))?;
    for k in root.keys() {
        if !SECTIONS.contains(&k.as_str()) {
            return Err(Error::UnknownKey(k.clone()));
        }
    }
    let mut d = Defaults { keys: Vec::new() };
    let t = |x: f64| T::lit(x);

    // [scan]
    let scan_table = sub_table(&root, "scan")?.ok_or_else(|| Error::MissingSection("scan".into()))?;
    let mut scan = Section::new("scan", Some(scan_table));
    let kind = ScanKind::parse(
        &scan
            .string("kind")?
            .ok_or_else(|| Error::config("`scan.kind` is required"))?,
    )?;

    // [pulse.<label>]
    let pulses_table = sub_table(&root, "pulse")?
        .filter(|p| !p.is_empty())
        .ok_or_else(|| Error::MissingSection("pulse.<label>".into()))?;
    struct RawPulse<'a> {
        label: String,
        sec: Section<'a>,
        wavelength: f64,
    }
    let mut raw = Vec::new();
    for (label, v) in pulses_table {
        let Value::Table(pt) = v else {
            return Err(Error::config(format!("`pulse.{label}` must be a section")));
        };
        let mut sec = Section::new(format!("pulse.{label}"), Some(pt));
        let wavelength = sec
            .float("wavelength_nm")?
            .ok_or_else(|| Error::config(format!("`pulse.{label}.wavelength_nm` is required")))?;
        raw.push(RawPulse { label: label.clone(), sec, wavelength });
    }

    let mut roles_default = {
        let longest = raw
            .iter()
            .max_by(|a, b| a.wavelength.partial_cmp(&b.wavelength).unwrap())
            .expect("nonempty");
        let shortest = raw
            .iter()
            .min_by(|a, b| a.wavelength.partial_cmp(&b.wavelength).unwrap())
            .expect("nonempty");
        (longest.label.clone(), shortest.label.clone())
    };
    if raw.len() == 1 {
        roles_default.1 = roles_default.0.clone();
    }
    let fundamental = scan.string("fundamental_color")?;
    let fundamental = d.or(&scan, "fundamental_color", fundamental, roles_default.0);
    let harmonic = scan.string("harmonic_color")?;
    let harmonic = d.or(&scan, "harmonic_color", harmonic, roles_default.1);
    let roles = Roles { fundamental: fundamental.clone(), harmonic: harmonic.clone() };

    let mut pulses = Vec::new();
    for mut rp in raw {
        let sec = &mut rp.sec;
        let intensity = sec.float("intensity_w_cm2")?;
        let intensity = d.or(sec, "intensity_w_cm2", intensity, 0.0);
        let fwhm_default = if rp.label == harmonic && kind != ScanKind::Fringe { 400.0 } else { 100.0 };
        let fwhm = sec.float("fwhm_fs")?;
        let fwhm = d.or(sec, "fwhm_fs", fwhm, fwhm_default);
        let delay = sec.float("delay_fs")?;
        let delay = d.or(sec, "delay_fs", delay, 0.0);
        let phase = sec.float("carrier_phase_rad")?;
        let phase = d.or(sec, "carrier_phase_rad", phase, 0.0);
        let pol = sec.float("polarization_deg")?;
        let pol = d.or(sec, "polarization_deg", pol, 0.0);
        let p = PulseSpec::new(rp.label.clone(), t(rp.wavelength), t(intensity), t(fwhm))
            .with_delay(t(delay))
            .with_carrier_phase(t(phase))
            .with_polarization(t(pol));
        p.validate().map_err(|e| Error::config(e.to_string()))?;
        pulses.push(p);
        rp.sec.finish()?;
    }
    let field = TwoColorField::new(pulses);
    field.validate().map_err(|e| Error::config(e.to_string()))?;
    let role_pulse = |label: &str| {
        field
            .get(label)
            .ok_or_else(|| Error::config(format!("role color `{label}` has no pulse section")))
    };
    let fe: T = photon_energy(role_pulse(&fundamental)?.wavelength)?;
    let he: T = photon_energy(role_pulse(&harmonic)?.wavelength)?;

    // Scan axis and options.
    let preset = match kind {
        ScanKind::Fringe => ScanConfig::<T>::shared_final(kind),
        _ => ScanConfig::<T>::polycrystalline(kind),
    };
    let axis_default = if kind == ScanKind::Fringe {
        // Preset axis is laid out for the preset wavelength; rescale to period/16.
        let period = crate::dyson::fringe_period(role_pulse(&fundamental)?.omega());
        let step = period / T::lit(16.0);
        let half = (T::lit(20.0) / step).round().to_usize().unwrap_or(1);
        let reach = step * T::from_usize_lossy(half);
        AxisSpec::linear(-reach, reach, 2 * half + 1)
    } else {
        preset.axis
    };
    let start = scan.float("start")?;
    let start = d.or(&scan, "start", start.map(t), axis_default.start);
    let stop = scan.float("stop")?;
    let stop = d.or(&scan, "stop", stop.map(t), axis_default.stop);
    let points = scan.int("points")?;
    let points = d.or(&scan, "points", points, axis_default.points);
    let spacing = scan.string("spacing")?.map(|s| Spacing::parse(&s)).transpose()?;
    let spacing = d.or(&scan, "spacing", spacing, axis_default.spacing);
    let sweep_color = scan.string("sweep_color")?;
    let sweep_color = d.or(&scan, "sweep_color", sweep_color, fundamental.clone());
    let locus = scan.string("locus")?.map(|s| Locus::parse(&s)).transpose()?;
    let locus = d.or(&scan, "locus", locus, Locus::FixedRatio);
    let bgsub = scan.boolean("background_subtraction")?;
    let bgsub = d.or(&scan, "background_subtraction", bgsub, true);
    let regime = scan.float("regime_threshold")?;
    let regime = d.or(&scan, "regime_threshold", regime, DEFAULT_REGIME_THRESHOLD);
    let rep = scan.float("repetition_rate_hz")?.map(t);
    let sub_enabled = scan.boolean("subscan")?;
    let sub_enabled = d.or(&scan, "subscan", sub_enabled, kind == ScanKind::Delay);
    let sub_center = scan.float("subscan_center_fs")?;
    let sub_span = scan.float("subscan_span_fs")?;
    let sub_samples = scan.int("subscan_samples_per_period")?;
    let subscan = if sub_enabled {
        Some(SubScan {
            center: t(d.or(&scan, "subscan_center_fs", sub_center, 0.0)),
            span: t(d.or(&scan, "subscan_span_fs", sub_span, 40.0)),
            samples_per_period: d.or(&scan, "subscan_samples_per_period", sub_samples, 16),
        })
    } else {
        None
    };
    scan.finish()?;

    // [channels]
    let mut ch = Section::new("channels", sub_table(&root, "channels")?);
    let std_set = ChannelSet::standard(&roles);
    let parse_ch = |s: String| s.parse::<ChannelSpec>();
    let ch_f = ch.string("fundamental")?.map(parse_ch).transpose()?;
    let ch_f = d.or(&ch, "fundamental", ch_f, std_set.fundamental.clone());
    let ch_h = match ch.string("harmonic")? {
        Some(s) if s == "none" => None,
        Some(s) => Some(s.parse::<ChannelSpec>()?),
        None => {
            d.keys.push(ch.key("harmonic"));
            if kind == ScanKind::Fringe { None } else { std_set.harmonic.clone() }
        }
    };
    let ch_m = ch.string("multicolor")?.map(parse_ch).transpose()?;
    let ch_m = d.or(&ch, "multicolor", ch_m, std_set.multicolor.clone());
    ch.finish()?;
    let channels = ChannelSet { fundamental: ch_f, harmonic: ch_h, multicolor: ch_m };

    // [levels]
    let mut lv = Section::new("levels", sub_table(&root, "levels")?);
    let preset_default = if kind == ScanKind::Fringe { "shared_final_ladder" } else { "polycrystalline" };
    let preset_name = lv.string("preset")?;
    let preset_name = d.or(&lv, "preset", preset_name, preset_default.to_string());
    let system = parse_levels::<T>(&mut lv, &mut d, &preset_name, fe, he)?;
    lv.finish()?;

    // [model]
    let mut md = Section::new("model", sub_table(&root, "model")?);
    let engine = md.string("engine")?.map(|s| Engine::parse(&s)).transpose()?;
    let engine = d.or(&md, "engine", engine, Engine::Dyson);
    let sf = md.float("strength_fundamental")?;
    let sh = md.float("strength_harmonic")?;
    let sm = md.float("strength_multicolor")?;
    let scaling = ScalingModel {
        strength_fundamental: t(d.or(&md, "strength_fundamental", sf, 1.0)),
        strength_harmonic: t(d.or(&md, "strength_harmonic", sh, 1.0)),
        strength_multicolor: t(d.or(&md, "strength_multicolor", sm, 1.0)),
    };
    md.finish()?;

    // [grid]
    let mut gr = Section::new("grid", sub_table(&root, "grid")?);
    let dt = gr.float("dt_fs")?.map(t);
    if dt.is_none() {
        d.keys.push(gr.key("dt_fs"));
    }
    let padding = gr.float("padding_fwhm")?;
    let padding = d.or(&gr, "padding_fwhm", padding, DEFAULT_PADDING_FWHM);
    gr.finish()?;

    // [tip]
    let mut tp = Section::new("tip", sub_table(&root, "tip")?);
    let td = TipSpec::<f64>::tungsten_default();
    let bias = tp.float("bias_voltage_v")?;
    let radius = tp.float("radius_nm")?;
    let k = tp.float("enhancement_factor")?;
    let wf = tp.float("work_function_ev")?;
    let tip = TipSpec {
        bias_voltage: t(d.or(&tp, "bias_voltage_v", bias, td.bias_voltage)),
        radius: t(d.or(&tp, "radius_nm", radius, td.radius)),
        enhancement_factor: t(d.or(&tp, "enhancement_factor", k, td.enhancement_factor)),
        nominal_work_function: t(d.or(&tp, "work_function_ev", wf, td.nominal_work_function)),
    };
    tp.finish()?;

    let config = ScanConfig {
        kind,
        axis: AxisSpec { start, stop, points, spacing },
        field,
        system,
        engine,
        background_subtraction: bgsub,
        roles,
        channels,
        sweep_color,
        locus,
        scaling,
        dt,
        padding_fwhm: t(padding),
        regime_threshold: t(regime),
        subscan,
        tip,
        repetition_rate: rep,
    };
    config.validate().map_err(|e| match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    })?;
    Ok(ParsedConfig { config, defaulted: d.keys })
}

fn parse_levels<T: Real>(
    lv: &mut Section<'_>,
    d: &mut Defaults,
    preset: &str,
    fe: T,
    he: T,
) -> Result<LevelSystem<T>> {
    let t = |x: f64| T::lit(x);
    let num = |lv: &mut Section<'_>, d: &mut Defaults, k: &str, fallback: f64| -> Result<T> {
        let v = lv.float(k)?;
        Ok(t(d.or(lv, k, v, fallback)))
    };
    let mut system = match preset {
        "polycrystalline" => {
            let det = num(lv, d, "detuning_ev", POLY_DETUNING_EV)?;
            let dip = num(lv, d, "dipole_enm", PRESET_DIPOLE)?;
            let hd = num(lv, d, "harmonic_dipole_enm", POLY_HARMONIC_DIPOLE)?;
            LevelSystem::polycrystalline(fe, he, det, dip, hd)
        }
        "shared_final_ladder" => {
            let dip = num(lv, d, "dipole_enm", PRESET_DIPOLE)?;
            let hd = num(lv, d, "harmonic_dipole_enm", PRESET_DIPOLE)?;
            LevelSystem::shared_final_ladder(fe, dip, hd)
        }
        "desk_two_level" => LevelSystem::desk_two_level(),
        "two_level" => {
            let photons = lv.int("photons")?;
            let photons = d.or(lv, "photons", photons, 1);
            let dip = num(lv, d, "dipole_enm", 0.1)?;
            LevelSystem::two_level(fe * T::from_usize_lossy(photons), dip)
        }
        "resonant_ladder" => {
            let photons = lv.int("photons")?;
            let photons = d.or(lv, "photons", photons, 4);
            let dip = num(lv, d, "dipole_enm", 0.1)?;
            LevelSystem::resonant_ladder(fe, photons, dip)
        }
        "custom" => {
            let energies = lv
                .floats("energies_ev")?
                .ok_or_else(|| Error::config("`levels.energies_ev` is required for custom levels"))?;
            let dipoles = lv
                .matrix("dipoles_enm")?
                .ok_or_else(|| Error::config("`levels.dipoles_enm` is required for custom levels"))?;
            let final_indices = lv
                .floats("final_indices")?
                .ok_or_else(|| Error::config("`levels.final_indices` is required for custom levels"))?;
            let initial = lv.int("initial_index")?;
            let initial = d.or(lv, "initial_index", initial, 0);
            LevelSystem {
                energies: energies.into_iter().map(t).collect(),
                dipoles: dipoles.into_iter().map(|r| r.into_iter().map(t).collect()).collect(),
                initial_index: initial,
                final_indices: final_indices.into_iter().map(|x| x as usize).collect(),
                final_states: FinalStates::Shared,
            }
        }
        other => {
            return Err(Error::config(format!(
                "levels.preset `{other}` not one of polycrystalline, shared_final_ladder, \
                 desk_two_level, two_level, resonant_ladder, custom"
            )))
        }
    };
    match lv.string("final_states")?.as_deref() {
        Some("distinct") => system.final_states = FinalStates::Distinct,
        Some("shared") => system.final_states = FinalStates::Shared,
        Some(other) => {
            return Err(Error::config(format!("levels.final_states `{other}` not one of distinct, shared")))
        }
        None => d.keys.push(lv.key("final_states")),
    }
    system.validate().map_err(|e| Error::config(e.to_string()))?;
    Ok(system)
}

fn num<T: Real>(x: T) -> String {
    let v = x.as_f64();
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v:?}")
    }
}

fn list<T: Real>(xs: &[T]) -> String {
    let items: Vec<String> = xs.iter().map(|&x| num(x)).collect();
    format!("[{}]", items.join(", "))
}

/// Canonical text form: every field explicit, levels spelled out in full.
/// `parse_config(serialize_config(c))` reproduces `c`.
pub fn serialize_config<T: Real>(c: &ScanConfig<T>) -> String {
    let mut s = String::new();
    let q = |x: &str| format!("{x:?}");
    let _ = writeln!(s, "[scan]");
    let _ = writeln!(s, "kind = {}", q(c.kind.as_str()));
    let _ = writeln!(s, "start = {}", num(c.axis.start));
    let _ = writeln!(s, "stop = {}", num(c.axis.stop));
    let _ = writeln!(s, "points = {}", c.axis.points);
    let _ = writeln!(s, "spacing = {}", q(c.axis.spacing.as_str()));
    let _ = writeln!(s, "fundamental_color = {}", q(&c.roles.fundamental));
    let _ = writeln!(s, "harmonic_color = {}", q(&c.roles.harmonic));
    let _ = writeln!(s, "sweep_color = {}", q(&c.sweep_color));
    let _ = writeln!(s, "locus = {}", q(c.locus.as_str()));
    let _ = writeln!(s, "background_subtraction = {}", c.background_subtraction);
    let _ = writeln!(s, "regime_threshold = {}", num(c.regime_threshold));
    if let Some(r) = c.repetition_rate {
        let _ = writeln!(s, "repetition_rate_hz = {}", num(r));
    }
    match &c.subscan {
        Some(sub) => {
            let _ = writeln!(s, "subscan = true");
            let _ = writeln!(s, "subscan_center_fs = {}", num(sub.center));
            let _ = writeln!(s, "subscan_span_fs = {}", num(sub.span));
            let _ = writeln!(s, "subscan_samples_per_period = {}", sub.samples_per_period);
        }
        None => {
            let _ = writeln!(s, "subscan = false");
        }
    }
    for p in &c.field.pulses {
        let _ = writeln!(s, "\n[pulse.{}]", p.label);
        let _ = writeln!(s, "wavelength_nm = {}", num(p.wavelength));
        let _ = writeln!(s, "intensity_w_cm2 = {}", num(p.peak_intensity));
        let _ = writeln!(s, "fwhm_fs = {}", num(p.fwhm));
        let _ = writeln!(s, "delay_fs = {}", num(p.delay));
        let _ = writeln!(s, "carrier_phase_rad = {}", num(p.carrier_phase));
        let _ = writeln!(s, "polarization_deg = {}", num(p.polarization_angle));
    }
    let _ = writeln!(s, "\n[channels]");
    let _ = writeln!(s, "fundamental = {}", q(&c.channels.fundamental.to_string()));
    let h = c.channels.harmonic.as_ref().map(|h| h.to_string()).unwrap_or_else(|| "none".into());
    let _ = writeln!(s, "harmonic = {}", q(&h));
    let _ = writeln!(s, "multicolor = {}", q(&c.channels.multicolor.to_string()));

    let sys = &c.system;
    let _ = writeln!(s, "\n[levels]");
    let _ = writeln!(s, "preset = \"custom\"");
    let _ = writeln!(s, "energies_ev = {}", list(&sys.energies));
    let rows: Vec<String> = sys.dipoles.iter().map(|r| list(r)).collect();
    let _ = writeln!(s, "dipoles_enm = [{}]", rows.join(", "));
    let _ = writeln!(s, "initial_index = {}", sys.initial_index);
    let finals: Vec<String> = sys.final_indices.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(s, "final_indices = [{}]", finals.join(", "));
    let _ = writeln!(s, "final_states = {}", q(sys.final_states.as_str()));

    let _ = writeln!(s, "\n[model]");
    let _ = writeln!(s, "engine = {}", q(c.engine.as_str()));
    let _ = writeln!(s, "strength_fundamental = {}", num(c.scaling.strength_fundamental));
    let _ = writeln!(s, "strength_harmonic = {}", num(c.scaling.strength_harmonic));
    let _ = writeln!(s, "strength_multicolor = {}", num(c.scaling.strength_multicolor));

    let _ = writeln!(s, "\n[grid]");
    if let Some(dt) = c.dt {
        let _ = writeln!(s, "dt_fs = {}", num(dt));
    }
    let _ = writeln!(s, "padding_fwhm = {}", num(c.padding_fwhm));

    let _ = writeln!(s, "\n[tip]");
    let _ = writeln!(s, "bias_voltage_v = {}", num(c.tip.bias_voltage));
    let _ = writeln!(s, "radius_nm = {}", num(c.tip.radius));
    let _ = writeln!(s, "enhancement_factor = {}", num(c.tip.enhancement_factor));
    let _ = writeln!(s, "work_function_ev = {}", num(c.tip.nominal_work_function));
    s
}
