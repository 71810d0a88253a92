use std::process::{Command, Output};

use tempfile::tempdir;

fn battflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_battflow")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_case_exits_with_code_two() {
    let o = battflow(&["solve", "--case", "no_such_case.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("case not found"), "{}", stderr(&o));
}

#[test]
fn solve_writes_report_and_profile() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("report.json");
    let o = battflow(&["solve", "--case", "case9", "--T", "6", "--ny", "2", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["converged"], true);
    assert_eq!(report["soc"].as_array().unwrap().len(), 6);
    assert!(out.with_extension("svg").exists());
}

#[test]
fn evgen_is_deterministic() {
    let a = battflow(&["evgen", "--seed", "7", "--n-ev", "25"]);
    let b = battflow(&["evgen", "--seed", "7", "--n-ev", "25"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let frag: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(frag["batt"].as_array().unwrap().len(), 25);
}

#[test]
fn validate_accepts_builtin_case() {
    let o = battflow(&["validate", "--case", "synth30"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn bench_writes_csv() {
    let dir = tempdir().unwrap();
    let o = battflow(&["bench", "--case", "case9", "--T", "4", "--ny", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("case,T,n_y,backend"));
    assert_eq!(lines.count(), 2);
    assert!(dir.path().join("memory.csv").exists());
}

#[test]
fn bad_step_length_is_rejected() {
    let o = battflow(&["solve", "--case", "case9", "--dt", "-1h"]);
    assert!(!o.status.success());
}
