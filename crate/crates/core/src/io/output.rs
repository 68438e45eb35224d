//! CSV tables, JSON summaries and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::scans::{ScanKind, ScanResult};

pub const CSV_NAME: &str = "scan.csv";
pub const SUMMARY_NAME: &str = "summary.json";
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// RFC 3339 wall-clock time of the run.
    pub timestamp: String,
    pub engine: String,
    pub config: String,
    pub files: Vec<FileDigest>,
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// 17 significant digits, so every `f64` survives the round trip.
fn cell<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

pub fn scan_csv_text<T: Real>(result: &ScanResult<T>) -> String {
    let mut out = String::new();
    let names: Vec<&str> = result.columns.iter().map(|c| c.name.as_str()).collect();
    out.push_str(&names.join(","));
    out.push('\n');
    for row in 0..result.rows() {
        let cells: Vec<String> = result.columns.iter().map(|c| cell(c.values[row])).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// One header row, one line per axis point.
pub fn write_scan_csv<T: Real>(result: &ScanResult<T>, path: &Path) -> Result<()> {
    write(path, scan_csv_text(result).as_bytes())
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(digest_bytes(&bytes))
}

fn number<T: Real>(x: T) -> Value {
    serde_json::Number::from_f64(x.as_f64()).map(Value::Number).unwrap_or(Value::Null)
}

fn pick<T: Real>(result: &ScanResult<T>, pairs: &[(&str, &str)]) -> Value {
    let mut m = Map::new();
    for (key, name) in pairs {
        if let Some(v) = result.derived_value(name) {
            m.insert((*key).into(), number(v));
        }
    }
    Value::Object(m)
}

pub fn summary_value<T: Real>(result: &ScanResult<T>, digests: &[FileDigest]) -> Value {
    let mut derived = Map::new();
    for (name, d) in &result.derived {
        derived.insert(
            name.clone(),
            json!({ "value": number(d.value), "residual": d.residual.map(number).unwrap_or(Value::Null) }),
        );
    }
    let mut top = Map::new();
    top.insert("kind".into(), json!(result.metadata.kind.as_str()));
    top.insert("engine".into(), json!(result.metadata.engine.as_str()));
    top.insert("tool_version".into(), json!(result.metadata.tool_version));
    match result.metadata.kind {
        ScanKind::Intensity => {
            top.insert(
                "fitted_slope".into(),
                pick(result, &[
                    ("fundamental", "slope_fundamental"),
                    ("harmonic", "slope_harmonic"),
                    ("multicolor", "slope_multicolor"),
                ]),
            );
            top.insert(
                "additivity".into(),
                pick(result, &[("mean", "additivity_mean"), ("relative_variation", "additivity_relative_variation")]),
            );
        }
        ScanKind::Polarization => {
            top.insert(
                "fitted_exponent".into(),
                pick(result, &[
                    ("fundamental", "exponent_fundamental"),
                    ("harmonic", "exponent_harmonic"),
                    ("multicolor", "exponent_multicolor"),
                ]),
            );
            top.insert(
                "additivity".into(),
                pick(result, &[("c1", "c1"), ("c2", "c2"), ("max_theta_deg", "additivity_max_theta_deg"), ("max", "additivity_max")]),
            );
        }
        ScanKind::Delay => {
            top.insert(
                "peak".into(),
                pick(result, &[("center_fs", "peak_center_fs"), ("height", "peak_height"), ("fwhm_fs", "peak_fwhm_fs"), ("model_fwhm_fs", "overlap_model_fwhm_fs")]),
            );
            top.insert(
                "additivity".into(),
                pick(result, &[("zero_delay", "additivity_at_zero_delay")]),
            );
        }
        ScanKind::Fringe => {
            for (key, name) in [("period_fs", "period_fs"), ("visibility", "visibility"), ("frequency_thz", "frequency_thz")] {
                top.insert(key.into(), result.derived_value(name).map(number).unwrap_or(Value::Null));
            }
        }
    }
    top.insert("derived".into(), Value::Object(derived));
    top.insert("warnings".into(), json!(result.warnings));
    top.insert("config".into(), json!(result.metadata.config));
    top.insert("digests".into(), serde_json::to_value(digests).unwrap_or(Value::Null));
    Value::Object(top)
}

/// Machine-readable summary; `digests` lists the files it describes.
pub fn write_summary_json<T: Real>(result: &ScanResult<T>, digests: &[FileDigest], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&summary_value(result, digests))
        .map_err(|e| Error::Serialize(e.to_string()))?;
    write(path, format!("{text}\n").as_bytes())
}

pub fn write_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Serialize(e.to_string()))?;
    write(path, format!("{text}\n").as_bytes())
}

/// Writes `scan.csv`, `summary.json` and `manifest.json` into `dir`.
pub fn write_outputs<T: Real>(result: &ScanResult<T>, dir: &Path) -> Result<(RunManifest, Vec<PathBuf>)> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join(CSV_NAME);
    write_scan_csv(result, &csv)?;
    let csv_digest = FileDigest { file: CSV_NAME.into(), sha256: digest_file(&csv)? };
    let summary = dir.join(SUMMARY_NAME);
    write_summary_json(result, std::slice::from_ref(&csv_digest), &summary)?;
    let summary_digest = FileDigest { file: SUMMARY_NAME.into(), sha256: digest_file(&summary)? };
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        engine: result.metadata.engine.as_str().into(),
        config: result.metadata.config.clone(),
        files: vec![csv_digest, summary_digest],
    };
    let mpath = dir.join(MANIFEST_NAME);
    write_manifest(&manifest, &mpath)?;
    Ok((manifest, vec![csv, summary, mpath]))
}
