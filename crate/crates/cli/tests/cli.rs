// Copyright 2026 QPW Contributors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qpw_cli::config::{Overrides, RunConfig};
use qpw_cli::formats::COUPLINGS_HEADER;
use qpw_core::circuit::CircuitParams;
use qpw_core::compiler::{tabulated_cz_decomposition, ideal_report};
use qpw_core::gates::Entangler;
use qpw_core::swt::{pair_coupling, DEFAULT_FD_STEP};
use serde_json::Value;
use tempfile::TempDir;

struct Run {
    code: i32,
    summary: Value,
    stderr: String,
}

fn qpw(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qpw")).args(args).output().expect("spawn qpw");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let summary = stdout.lines().last().and_then(|l| serde_json::from_str(l).ok()).unwrap_or(Value::Null);
    Run { code: out.status.code().unwrap_or(-1), summary, stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run_with(dir: &TempDir, cmd: &str, config: &str, out: &str, extra: &[&str]) -> Run {
    let cfg = write(dir.path(), &format!("{out}.json"), config);
    let out = dir.path().join(out);
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    qpw(&args)
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn malformed_json_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let r = run_with(&dir, "spectrum", "{\"seed\": ", "bad", &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("EOF") || r.stderr.contains("line"), "{}", r.stderr);
}

#[test]
fn invalid_values_are_rejected_before_running() {
    let dir = TempDir::new().unwrap();
    for (k, cfg) in [
        r#"{"unknown_key": 1}"#,
        r#"{"numerics": {"dt_ps": -1.0}}"#,
        r#"{"pulse": {"theta0": 1.5, "delta": 0.1}}"#,
        r#"{"circuit": {"source": "energies", "ej1": -1.0, "ec1": 0.28, "ej2": 20.5, "ec2": 0.24, "ejc0": 39.5, "ecc": 0.22, "g1": 0.1, "g2": 0.1, "g12": 0.0}}"#,
        r#"{"couplings": {"flux_min": 0.5, "flux_max": 1.6}}"#,
        r#"{"compile": {"target": {"kind": "matrix", "label": "U", "path": "missing.json"}}}"#,
    ]
    .iter()
    .enumerate()
    {
        let r = run_with(&dir, "spectrum", cfg, &format!("c{k}"), &[]);
        assert_eq!(r.code, 2, "{cfg}: {}", r.stderr);
        assert!(!dir.path().join(format!("c{k}")).exists(), "nothing written for {cfg}");
    }
    let r = qpw(&["spectrum", "--dt", "0", "--out", dir.path().join("dt").to_str().unwrap()]);
    assert_eq!(r.code, 2);
}

#[test]
fn overrides_apply_on_top_of_the_file() {
    let dir = TempDir::new().unwrap();
    let p = write(dir.path(), "c.json", r#"{"seed": 4, "numerics": {"dt_ps": 2.0}}"#);
    let over = Overrides { out: Some(dir.path().join("o")), seed: Some(9), dt_ps: Some(5.0) };
    let c = RunConfig::load(Some(&p), &over).unwrap();
    assert_eq!(c.seed, 9);
    assert_eq!(c.compile.optimizer.seed, 9);
    assert!((c.numerics.dt() - 5e-3).abs() < 1e-15);
    assert_eq!(c.output_dir, dir.path().join("o"));
    let d = RunConfig::load(None, &Overrides::default()).unwrap();
    assert!((d.couplings.flux_max - 0.24 * PI).abs() < 1e-15);
}

#[test]
fn verify_cz_passes_on_the_table() {
    let dir = TempDir::new().unwrap();
    let r = run_with(&dir, "verify-cz", "{}", "v", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.summary["fidelity"].as_f64().unwrap() >= 0.9995);
    let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/verification.json")).unwrap()).unwrap();
    assert_eq!(doc["scores"].as_array().unwrap().len(), 8);
}

#[test]
fn verify_cz_fails_on_a_perturbed_ansatz() {
    let dir = TempDir::new().unwrap();
    let mut a = serde_json::to_value(tabulated_cz_decomposition()).unwrap();
    fs::write(dir.path().join("good.json"), serde_json::to_string(&a).unwrap()).unwrap();
    let r = run_with(&dir, "verify-cz", r#"{"verify": {"ansatz": "good.json"}}"#, "g", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    // spoil the first local angle of layer 1 by 0.3π
    let x = &mut a["layers"][0]["rotations"]["qudit1"][0]["angles_pi"][0];
    *x = Value::from(x.as_f64().unwrap() + 0.3);
    fs::write(dir.path().join("bad.json"), serde_json::to_string(&a).unwrap()).unwrap();
    let r = run_with(&dir, "verify-cz", r#"{"verify": {"ansatz": "bad.json"}}"#, "b", &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.summary["fidelity"].as_f64().unwrap() < 0.9995);
    assert!(dir.path().join("b/verification.json").is_file());
}

#[test]
fn verify_cz_composes_reports() {
    let dir = TempDir::new().unwrap();
    let third = 2.0 * PI / 3.0;
    for (name, pair, phase) in [("r1.json", Entangler::Iswap0110, 0.7), ("r2.json", Entangler::Iswap1221, -1.1)] {
        fs::write(dir.path().join(name), serde_json::to_string(&ideal_report(pair, third, phase)).unwrap()).unwrap();
    }
    let r = run_with(&dir, "verify-cz", r#"{"verify": {"reports": ["r1.json", "r2.json"]}}"#, "c", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.summary["composed_fidelity"].as_f64().unwrap() > 0.9999);
    let (_, rows) = csv_rows(&dir.path().join("c/composed_cz_tomogram.csv"));
    assert_eq!(rows.len(), 81);

    // layers swapped: report pairs no longer match the schedule
    let r = run_with(&dir, "verify-cz", r#"{"verify": {"reports": ["r2.json", "r1.json"]}}"#, "s", &[]);
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn spectrum_table_row_and_levels() {
    let dir = TempDir::new().unwrap();
    let r = run_with(&dir, "spectrum", "{}", "s", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (header, rows) = csv_rows(&dir.path().join("s/transitions.csv"));
    assert_eq!(header[2], "resonance_GHz");
    let row = rows.iter().find(|r| r[0] == "01" && r[1] == "10").expect("01-10 row");
    assert!((f(&row[2]) / 0.81 - 1.0).abs() < 0.05);
    for pair in [("12", "21"), ("11", "02"), ("11", "20")] {
        assert!(rows.iter().any(|r| r[0] == pair.0 && r[1] == pair.1), "{pair:?}");
    }
    let (_, levels) = csv_rows(&dir.path().join("s/spectrum.csv"));
    assert_eq!(levels.len(), 125);
    assert_eq!(levels.iter().filter(|r| r[4] == "true").count(), 9);
}

#[test]
fn uncoupled_spectrum_dressed_equals_bare() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"circuit": {"source": "energies", "ej1": 13.5, "ec1": 0.28, "ej2": 20.5, "ec2": 0.24,
                  "ejc0": 39.5, "ecc": 0.22, "g1": 0.0, "g2": 0.0, "g12": 0.0}}"#;
    let r = run_with(&dir, "spectrum", cfg, "g0", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, rows) = csv_rows(&dir.path().join("g0/spectrum.csv"));
    for row in &rows {
        assert!((f(&row[1]) - f(&row[2])).abs() < 1e-10, "{row:?}");
    }
}

#[test]
fn capacitance_source_runs() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"circuit": {"source": "capacitances", "capacitances": {"c1": 69.055, "c2": 80.564, "cc": 87.888,
                  "c1c": 5.728, "c2c": 7.597, "c12": 0.045}, "ej1": 13.5, "ej2": 20.5, "ejc0": 39.5}}"#;
    let r = run_with(&dir, "spectrum", cfg, "cap", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
}

#[test]
fn couplings_sweep_and_single_point() {
    let dir = TempDir::new().unwrap();
    let r = run_with(&dir, "couplings", "{}", "sweep", &["--jobs", "2"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (header, rows) = csv_rows(&dir.path().join("sweep/couplings.csv"));
    assert_eq!(header, COUPLINGS_HEADER);
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().flatten().all(|x| f(x).is_finite()));
    assert!(rows.iter().all(|r| f(&r[3]).abs() > 1e-3 && f(&r[5]).abs() > 1e-3));

    let flux = 0.2 * PI;
    let cfg = format!(r#"{{"couplings": {{"flux_min": {flux:?}, "flux_max": {flux:?}, "points": 1}}}}"#);
    let r = run_with(&dir, "couplings", &cfg, "one", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, rows) = csv_rows(&dir.path().join("one/couplings.csv"));
    let p = CircuitParams::reference();
    let a = pair_coupling(&p, ("01", "10"), flux, DEFAULT_FD_STEP).unwrap();
    let b = pair_coupling(&p, ("12", "21"), flux, DEFAULT_FD_STEP).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(f(&rows[0][2]), a.j_value);
    assert_eq!(f(&rows[0][3]), a.j_flux_derivative);
    assert_eq!(f(&rows[0][4]), b.j_value);
    assert_eq!(f(&rows[0][5]), b.j_flux_derivative);
}

#[test]
fn couplings_past_the_crossing_is_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"couplings": {"flux_min": 0.9738937226128358, "flux_max": 0.9738937226128358, "points": 1}}"#;
    let r = run_with(&dir, "couplings", cfg, "x", &[]);
    assert_eq!(r.code, 1, "{}", r.stderr);
}

#[test]
fn zero_amplitude_simulation_is_identity() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"pulse": {"delta": 0.0, "duration": 30.0}, "simulate": {"target": {"kind": "identity"}}}"#;
    let r = run_with(&dir, "simulate-gate", cfg, "id", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.summary["leakage"].as_f64().unwrap() < 1e-6);
    assert!(r.summary["fidelity"].as_f64().unwrap() > 1.0 - 1e-8);
    let (header, rows) = csv_rows(&dir.path().join("id/gate_report_tomogram.csv"));
    assert_eq!(header, ["row_label", "col_label", "re", "im"]);
    assert_eq!(rows.len(), 81);
    assert_eq!((rows[10][0].as_str(), rows[10][1].as_str()), ("01", "01"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"seed": 11, "compile": {"optimizer": {"restarts": 8, "max_iterations": 400}}}"#;
    for out in ["a", "b"] {
        for cmd in ["compile", "verify-cz", "spectrum"] {
            let r = run_with(&dir, cmd, cfg, out, &["--jobs", if out == "a" { "1" } else { "3" }]);
            assert!(r.code == 0 || r.code == 3, "{cmd}: {}", r.stderr);
        }
    }
    for file in ["compilation.json", "compile_restarts.csv", "verification.json", "spectrum.csv", "transitions.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
    // a different seed moves the restarts
    let r = run_with(&dir, "compile", cfg, "c", &["--seed", "12"]);
    assert!(r.code == 0 || r.code == 3);
    let a = fs::read(dir.path().join("a/compile_restarts.csv")).unwrap();
    let c = fs::read(dir.path().join("c/compile_restarts.csv")).unwrap();
    assert_ne!(a, c);
}

#[test]
fn compile_cz_converges_and_single_layer_fails() {
    let dir = TempDir::new().unwrap();
    let r = run_with(&dir, "compile", "{}", "cz", &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.summary["final_cost"].as_f64().unwrap() < 1e-6);

    let cfg = r#"{"compile": {"schedule": [{"entangler": "ISWAP_0110", "angle_pi": -0.6666666666666666}],
                  "optimizer": {"restarts": 4, "batch": 4, "max_iterations": 300}}}"#;
    let r = run_with(&dir, "compile", cfg, "m1", &[]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert_eq!(r.summary["converged"], Value::Bool(false));
    assert!(dir.path().join("m1/compilation.json").is_file());
}

#[test]
fn calibrate_reaches_the_fidelity_level() {
    let dir = TempDir::new().unwrap();
    let r = run_with(&dir, "calibrate", r#"{"numerics": {"validate": false}}"#, "cal", &["--dt", "10"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.summary["fidelity"].as_f64().unwrap() >= 0.995, "{}", r.summary);
    let (header, rows) = csv_rows(&dir.path().join("cal/calibration_trace.csv"));
    assert_eq!(header, ["duration_ns", "fidelity"]);
    assert!(rows.len() >= 9);
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("cal/calibration.json")).unwrap()).unwrap();
    assert_eq!(json["pair"], "ISWAP_0110");
}

#[test]
fn bare_resonance_calibration_exits_with_verification_code() {
    let dir = TempDir::new().unwrap();
    let cfg = r#"{"numerics": {"validate": false}, "calibrate": {"resonance": "bare"}}"#;
    let r = run_with(&dir, "calibrate", cfg, "bare", &["--dt", "10"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(dir.path().join("bare/calibration_trace.csv").is_file());
}
