use std::path::Path;
use std::process::{Command, Output};

fn csf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csf-lab")).args(args).output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn run_prints_summary_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "kind": "flow", "initial": { "cos2": 0.05 }, "t_end": 1.0 }"#);
    let out = dir.path().join("out");
    let o = csf(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["kind"], "flow");
    assert_eq!(summary["seed"], 11);
    for f in ["trajectory.csv", "plot_data.csv", "summary.json", "config.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn great_circle_run_passes_stationarity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "kind": "flow", "initial": { "sin": 0.2, "cos": 0.1 }, "t_end": 1.0 }"#);
    let o = csf(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let flags = summary["flags"].as_array().unwrap();
    assert!(flags.iter().any(|f| f["name"] == "stationary" && f["passed"] == true));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = csf(&["run", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    let cfg = write_config(dir.path(), r#"{ "kind": "flow", "initial": { "sin": 2.0 } }"#);
    assert_eq!(csf(&["run", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(csf(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(csf(&["check", "--criterion", "99"]).status.code(), Some(2));
}

#[test]
fn chart_breach_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "kind": "flow", "initial": { "const": 0.3 }, "t_end": 5.0 }"#);
    let o = csf(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn check_single_criterion() {
    let o = csf(&["check", "--criterion", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.starts_with("[PASS] AC01"), "{text}");
    assert_eq!(text.lines().count(), 1);
}
