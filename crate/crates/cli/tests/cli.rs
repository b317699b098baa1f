use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bellcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellcert"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn find<'a>(report: &'a Value, id: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["id"] == id)
        .unwrap_or_else(|| panic!("no check {id}"))
}

#[test]
fn embedding_on_the_flat_circle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"p_list": [2], "models": [{"kind": "circle", "N": 128}], "budgets": {"samples": 10}}"#,
    );
    let out = dir.path().join("out");
    let o = bellcert(&[
        "embedding",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let ratio = find(&report(&out), "verify.embedding.worked")["value"]
        .as_f64()
        .unwrap();
    let expected = 1.14466 / (3.0 * PI);
    assert!((ratio - expected).abs() < 0.02 * expected, "{ratio}");
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("id,anchor,params,margin,value,pass,status"));
    assert!(out.join("plotdata/embedding_ratio.csv").is_file());
}

#[test]
fn empty_p_list_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"p_list": []}"#);
    let out = dir.path().join("out");
    let o = bellcert(&[
        "embedding",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("p_list"));
    assert!(!out.exists());
}

#[test]
fn malformed_json_and_missing_files_are_schema_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "{ not json");
    assert_eq!(bellcert(&["all", "--config", &cfg]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(
        bellcert(&["all", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn constant_audit_reports_the_supremum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a/b");
    let o = bellcert(&["constant-audit", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rep = report(&out);
    let v = find(&rep, "verify.constant.sup")["value"].as_f64().unwrap();
    assert!(v > 2.5 && v < 3.0 && (v - 2.7818336755).abs() < 1e-8, "{v}");
    assert!(out.join("plotdata/constant_function.csv").is_file());
}

#[test]
fn identical_seeds_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"p_list": [3], "models": [{"kind": "ou", "d": 1, "K": 12}], "budgets": {"ascent_iters": 20}}"#,
    );
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = bellcert(&[
            "riesz-norm",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("report.json")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
}

#[test]
fn unknown_subcommand_is_rejected() {
    assert_eq!(bellcert(&["frobnicate"]).status.code(), Some(2));
}
