use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn critwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critwave"))
        .args(args)
        .env_remove("CRITWAVE_OUT")
        .output()
        .expect("spawn critwave")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write_config(dir: &Path, a: f64, n: usize, t_final: f64) -> String {
    let path = dir.join("run.json");
    let text = format!(
        r#"{{
            "dimension": 3,
            "grid": {{"r_max": "auto", "n": {n}}},
            "coefficient": {{"family": "sinh_power", "sigma": 2}},
            "sign": 1,
            "data": {{"kind": "scaled_ground_state", "a": {a}, "lambda": 0.25}},
            "solver": {{"cfl": 0.5, "t_final": {t_final}}}
        }}"#
    );
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn constants_in_three_dimensions() {
    let v = stdout_json(&critwave(&["constants", "--d", "3"]));
    assert!((v["energy_E1"].as_f64().unwrap() - 4.2737).abs() < 1e-4);
    assert_eq!(v["critical_power"].as_f64(), Some(5.0));
}

#[test]
fn check_phi_sinh_power_passes() {
    let v = stdout_json(&critwave(&["check-phi", "--family", "sinh-power", "--sigma", "2"]));
    let reports = v.as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r["verdict"] == "pass"), "{v:#}");
}

#[test]
fn invalid_config_reports_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"dimension": 3, "grid": {"n": 64}}"#).unwrap();
    let out = critwave(&["evolve", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert_eq!(err["error"], "invalid_config");
    assert!(err["field"].is_string());
}

#[test]
fn evolve_writes_trace_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 1.5, 1024, 4.0);
    let out_dir = dir.path().join("out");
    let v = stdout_json(&critwave(&["evolve", "--config", &config, "--out", out_dir.to_str().unwrap()]));
    assert_eq!(v["prediction"], "BlowUp");
    assert_eq!(v["verdict"], "Consistent");
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,"));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], 1);
}

#[test]
fn environment_overrides_output_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 1.5, 512, 2.0);
    let from_env = dir.path().join("env");
    let from_flag = dir.path().join("flag");
    let out = Command::new(env!("CARGO_BIN_EXE_critwave"))
        .args(["evolve", "--config", &config, "--out", from_flag.to_str().unwrap()])
        .env("CRITWAVE_OUT", &from_env)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(from_env.join("summary.json").exists());
    assert!(!from_flag.exists());
}

#[test]
fn sweep_needs_amplitudes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 1.0, 512, 1.0);
    let out = critwave(&["sweep", "--config", &config, "--a", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_phase_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), 1.0, 512, 1.0);
    let out_dir = dir.path().join("sweep");
    let v = stdout_json(&critwave(&[
        "sweep",
        "--config",
        &config,
        "--a",
        "0.25,1.5",
        "--out",
        out_dir.to_str().unwrap(),
    ]));
    assert_eq!(v["failed"], 0);
    let table = std::fs::read_to_string(out_dir.join("phase.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("a,E_phi,grad_ratio,prediction,outcome,verdict"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn verify_rejects_oversized_time_step() {
    let out = critwave(&["verify", "--only", "energy", "--dt-scale", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn verify_single_criterion() {
    let out = critwave(&["verify", "--only", "constants"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 1);
}

#[test]
fn verify_unknown_criterion_is_an_error() {
    let out = critwave(&["verify", "--only", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}
