//! End-to-end runs of the `foldent` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn foldent(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foldent")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn scalar(o: &Output) -> f64 {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    stdout(o).parse().expect("a number on stdout")
}

#[test]
fn folding_and_lyapunov_of_doubling() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["folding", "lyapunov"] {
        let o = foldent(dir.path(), &[cmd, "--map", "nfold:2", "--measure", "lebesgue"]);
        assert_eq!(stdout(&o), "0.693147", "{cmd}");
        assert!(dir.path().join(format!("foldent_out/{cmd}.csv")).is_file());
    }
}

#[test]
fn production_of_skewed_tent_vanishes() {
    let dir = tempfile::tempdir().unwrap();
    let v = scalar(&foldent(dir.path(), &["production", "--map", "skewed_tent:3", "--measure", "lebesgue"]));
    assert!(v.abs() < 1e-4, "{v}");
}

#[test]
fn bits_only_change_the_output_scale() {
    let dir = tempfile::tempdir().unwrap();
    let nats = scalar(&foldent(dir.path(), &["folding", "--map", "nfold:4", "--out", "n"]));
    let bits = scalar(&foldent(dir.path(), &["folding", "--map", "nfold:4", "--bits", "--out", "b"]));
    assert!((nats - 4f64.ln()).abs() < 1e-5);
    assert!((bits - 2.0).abs() < 1e-6);
    let csv = fs::read_to_string(dir.path().join("b/folding.csv")).unwrap();
    assert_eq!(csv, "estimator,value\nfolding_branch,2\n");
}

#[test]
fn every_artifact_has_header_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = foldent(dir.path(), &["degrate", "--map", "logistic:4", "--levels", "6", "--seed", "5"]);
    assert!(o.status.success());
    let out = dir.path().join("foldent_out");
    let csv = fs::read_to_string(out.join("degrate.csv")).unwrap();
    assert!(csv.starts_with("m,eta,"));
    assert_eq!(csv.lines().count(), 7);
    let json: Value = serde_json::from_str(&fs::read_to_string(out.join("degrate.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["seed"], 5);
    assert_eq!(json["config"]["levels"], 6);
    assert_eq!(json["config"]["map"], "logistic:4");
    let svg = fs::read_to_string(out.join("degrate.svg")).unwrap();
    assert!(svg.contains("<polyline") && svg.contains("<path"));
}

#[test]
fn json_flag_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = foldent(dir.path(), &["entropy", "--map", "nfold:2", "--measure", "bernoulli:0.3,0.7", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let h = -(0.3f64 * 0.3f64.ln() + 0.7 * 0.7f64.ln());
    assert!((v["summary"]["value"].as_f64().unwrap() - h).abs() < 1e-6);
    assert_eq!(v["config"]["command"], "entropy");
}

#[test]
fn counterexample_single_block() {
    let dir = tempfile::tempdir().unwrap();
    let o = foldent(dir.path(), &["counterexample", "--levels", "1", "--out", "ce"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ce = dir.path().join("ce");
    let csv = fs::read_to_string(ce.join("probe.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].split(',').all(|cell| !cell.is_empty()), "{}", lines[1]);
    let map: Value = serde_json::from_str(&fs::read_to_string(ce.join("map.json")).unwrap()).unwrap();
    assert_eq!(map["kind"], "counterexample");
    let svg = fs::read_to_string(ce.join("probe.svg")).unwrap();
    assert_eq!(svg.matches("stroke-dasharray").count(), 2);
    // the saved map reloads, and its horseshoe measure has folding entropy c
    let o = foldent(dir.path(), &["folding", "--map", "ce/map.json", "--measure", "horseshoe"]);
    assert!((scalar(&o) - 0.5 * 2f64.ln()).abs() < 1e-5);
}

#[test]
fn invalid_counterexample_params_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"params": {"p_vec": [0.5, 0.5]}}"#).unwrap();
    let o = foldent(dir.path(), &["counterexample", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.trim().lines().count(), 1);
    let v: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(v["kind"], "constraint");
    assert!(v["message"].as_str().unwrap().contains("c = "));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    for args in [
        vec!["folding", "--config", "bad.json"],
        vec!["folding", "--map", "nfold:x"],
        vec!["folding", "--map", "nfold:2", "--measure", "gauss"],
        vec!["folding"],
        vec!["folding", "--map", "nfold:2", "--estimator", "magic"],
        vec!["frobnicate"],
    ] {
        let o = foldent(dir.path(), &args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let v: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
        assert_eq!(v["error"], "config");
    }
}

#[test]
fn computation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    // the partition estimator refuses measures charging the critical point
    let o = foldent(dir.path(), &["folding", "--map", "logistic:4", "--measure", "dirac:0.5", "--estimator", "partition"]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(v["kind"], "precondition");
}

#[test]
fn verify_filter_and_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let o = foldent(dir.path(), &["verify", "--only", "thm41", "--out", "v"]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&o);
    assert!(table.contains("thm41") && table.contains("PASS"));
    assert!(!table.contains("closed_forms"));
    fs::write(dir.path().join("t.json"), r#"{"only": ["degrate"], "tolerance_scale": 0.0}"#).unwrap();
    let o = foldent(dir.path(), &["verify", "--config", "t.json", "--out", "t"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("FAILED: degrate"));
    let summary = fs::read_to_string(dir.path().join("t/verify.csv")).unwrap();
    assert!(summary.starts_with("id,key,title,checks,failed,pass\n"));
}

#[test]
fn seeded_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        vec!["dimension", "--map", "nfold:2", "--measure", "path:0.3,0.7:20000", "--samples", "50", "--out", out]
    };
    assert!(foldent(dir.path(), &args("a")).status.success());
    assert!(foldent(dir.path(), &args("b")).status.success());
    let a = fs::read(dir.path().join("a/dimension.csv")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/dimension.csv")).unwrap());
    let o = foldent(dir.path(), &["dimension", "--map", "nfold:2", "--measure", "path:0.3,0.7:20000", "--samples", "50", "--seed", "99", "--out", "c"]);
    assert!(o.status.success());
    assert_ne!(a, fs::read(dir.path().join("c/dimension.csv")).unwrap());
}
