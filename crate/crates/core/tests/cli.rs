use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const SETUP: &str = r#"
[pulse.omega]
wavelength_nm = 800
intensity_w_cm2 = 6.7e11
fwhm_fs = 100
polarization_deg = 48

[pulse.two_omega]
wavelength_nm = 400
intensity_w_cm2 = 2.2e10
fwhm_fs = 400
polarization_deg = -64
"#;

fn nanotip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nanotip")).args(args).output().unwrap()
}

fn write_config(dir: &Path, scan: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, format!("{scan}\n{SETUP}")).unwrap();
    path.to_string_lossy().into_owned()
}

fn run(dir: &Path, sub: &str, scan: &str) -> (Output, std::path::PathBuf) {
    let cfg = write_config(dir, scan);
    let out = dir.join("out");
    let o = nanotip(&[sub, "--config", &cfg, "--out", out.to_str().unwrap()]);
    (o, out)
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn info_reports_setup_values() {
    let o = nanotip(&["info"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for line in [
        "dc_field_v_per_m = 8.5000e8",
        "effective_work_function_ev = 4.8937",
        "photon_energy_ev.omega = 1.5498",
        "photon_energy_ev.two_omega = 3.0996",
        "peak_field_v_per_nm.omega = 2.2468",
        "two_color_intensity_w_cm2 = 2.1455e11",
    ] {
        assert!(text.lines().any(|l| l == line), "missing `{line}` in\n{text}");
    }
}

#[test]
fn delay_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let scan = "[scan]\nkind = \"delay\"\nstart = -500\nstop = 500\npoints = 11\nsubscan = false";
    let (o, out) = run(dir.path(), "scan-delay", scan);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "delay_fs,p_w,p_2w,p_total,p_multicolor_bgsub,additivity"
    );
    assert_eq!(lines.count(), 11);
    let first_cell = csv.lines().nth(1).unwrap().split(',').next().unwrap();
    assert_eq!(first_cell, "-5.0000000000000000e2");
}

#[test]
fn intensity_outputs_and_digests() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = run(dir.path(), "scan-intensity", "[scan]\nkind = \"intensity\"\npoints = 5");
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary.get("fitted_slope").is_some(), "{summary}");
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let files = manifest["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let bytes = fs::read(out.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }
}

#[test]
fn fringe_summary_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fringe.toml");
    fs::write(
        &path,
        r#"
[scan]
kind = "fringe"
start = -20
stop = 20
points = 247

[pulse.nu]
wavelength_nm = 1560
intensity_w_cm2 = 1e9

[pulse.two_nu]
wavelength_nm = 780
intensity_w_cm2 = 1e9

[levels]
preset = "shared_final_ladder"

[channels]
fundamental = "nu:4"
harmonic = "none"
multicolor = "nu:2,two_nu:1"
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = nanotip(&["fringe", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let period = summary["period_fs"].as_f64().unwrap();
    assert!((period - 2.60).abs() < 0.02);
    assert!(summary.get("visibility").is_some());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run(dir.path(), "scan-intensity", "[scan]\nkind = \"intensity\"\nbogus = 1");
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error[E_CONFIG_UNKNOWN_KEY]") && err.contains("bogus"), "{err}");

    let (o, _) = run(dir.path(), "scan-polarization", "[scan]\nkind = \"intensity\"");
    assert_eq!(o.status.code(), Some(2));

    let neg = SETUP.replace("fwhm_fs = 100", "fwhm_fs = -5");
    let path = dir.path().join("neg.toml");
    fs::write(&path, format!("[scan]\nkind = \"intensity\"\n{neg}")).unwrap();
    let o = nanotip(&["scan-intensity", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fwhm > 0"), "{}", stderr(&o));
}

#[test]
fn numeric_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let scan = "[scan]\nkind = \"intensity\"\n\n[grid]\ndt_fs = 20";
    let (o, _) = run(dir.path(), "scan-intensity", scan);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error[E_NUMERIC"));
}

#[test]
fn io_errors_exit_4() {
    let o = nanotip(&["scan-intensity", "--config", "/nonexistent/run.toml"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error[E_IO]"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scan]\nkind = \"intensity\"\npoints = 5");
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let out = blocker.join("out");
    let o = nanotip(&["scan-intensity", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn engine_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[scan]\nkind = \"intensity\"\npoints = 5");
    let out = dir.path().join("out");
    let o = nanotip(&[
        "scan-intensity",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--engine",
        "scaling",
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["engine"], "scaling");
}
