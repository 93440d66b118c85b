use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn hbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hbm"))
        .args(args)
        .env("HBM_NUM_THREADS", "1")
        .output()
        .expect("spawn hbm")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn malformed_body_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", "{\"dim\": 2, \"kind\":");
    let out = hbm(&["spectrum", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn nonconvex_body_exits_with_input_code() {
    let dir = tempfile::tempdir().unwrap();
    let body = write(
        dir.path(),
        "dent.json",
        r#"{"dim": 2, "kind": "perturbed_ball", "degree": 3, "order": 0, "amplitude": 0.5}"#,
    );
    assert_eq!(hbm(&["spectrum", s(&body)]).status.code(), Some(2));
}

#[test]
fn wrong_arity_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let ball = write(dir.path(), "b.json", r#"{"dim": 2, "kind": "ball"}"#);
    assert_eq!(
        hbm(&["check", "ratio-bm", s(&ball), s(&ball)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        hbm(&["check", "no-such-inequality", s(&ball)])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(hbm(&["solve"]).status.code(), Some(1));
}

#[test]
fn help_exits_cleanly() {
    assert_eq!(hbm(&["--help"]).status.code(), Some(0));
}

#[test]
fn translated_dilate_gives_equality() {
    let dir = tempfile::tempdir().unwrap();
    let k = write(
        dir.path(),
        "k.json",
        r#"{"dim": 2, "kind": "ellipsoid", "semi_axes": [1.3, 0.9]}"#,
    );
    let l = write(
        dir.path(),
        "l.json",
        r#"{"dim": 2, "kind": "ellipsoid", "semi_axes": [2.6, 1.8], "center": [0.2, -0.1]}"#,
    );
    let out = hbm(&["check", "minkowski-second", s(&k), s(&l), "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().nth(1).unwrap();
    assert!(row.starts_with("minkowski_second_stability,"), "{row}");
    assert!(row.ends_with(",equality"), "{row}");
}

#[test]
fn spectrum_of_the_disk() {
    let dir = tempfile::tempdir().unwrap();
    let ball = write(
        dir.path(),
        "b.json",
        r#"{"dim": 2, "kind": "ball", "radius": 1.5}"#,
    );
    let out_file = dir.path().join("spectrum.json");
    let out = hbm(&["spectrum", s(&ball), "--count", "5", "--out", s(&out_file)]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out_file).unwrap()).unwrap();
    let eig: Vec<f64> = v["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    for (e, want) in eig.iter().zip([0.0, 1.0, 1.0, 4.0, 4.0]) {
        assert!((e - want).abs() < 1e-10, "{eig:?}");
    }
}

#[test]
fn classify_matches_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let profiles = dir.path().join("profiles");
    let out = hbm(&["classify", "--p", "-20", "--profiles", s(&profiles)]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["matches_prediction"], Value::Bool(true));
    assert_eq!(v["found"], serde_json::json!([3, 4]));
    let csvs = std::fs::read_dir(&profiles).unwrap().count();
    assert_eq!(csvs, 2);
}

#[test]
fn solve_returns_to_the_ball() {
    let out = hbm(&["solve", "--p", "-5", "--dim", "3", "--lmax", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["pde_residual"].as_f64().unwrap() < 1e-7);
    assert!((v["lambda2"].as_f64().unwrap() - 3.0).abs() < 1e-8);
    assert_eq!(v["verdicts"]["unit_ball"], "true");
    assert_eq!(v["verdicts"]["origin_centred_theorem"], "unit_ball");
}

#[test]
fn isotropize_sends_an_ellipse_to_a_disk() {
    let dir = tempfile::tempdir().unwrap();
    let e = write(
        dir.path(),
        "e.json",
        r#"{"dim": 2, "kind": "ellipsoid", "semi_axes": [2.0, 1.0]}"#,
    );
    let out = hbm(&["isotropize", s(&e), "--lmax", "24"]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["defect"].as_f64().unwrap() < 1e-8);
    let iso = write(dir.path(), "iso.json", &v["body"].to_string());
    let spec = hbm(&["spectrum", s(&iso), "--count", "3"]);
    let w: Value = serde_json::from_slice(&spec.stdout).unwrap();
    assert_eq!(w["multiplicities"][1], 2);
}

#[test]
fn corpus_is_reproducible() {
    let run = || hbm(&["corpus", "--cases", "2", "--dim", "2", "--seed", "7"]);
    let (a, b) = (run(), run());
    assert_eq!(a.status.code(), Some(0));
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
    let header = String::from_utf8(a.stdout).unwrap();
    assert!(header.starts_with("name,lhs,rhs,residual,verdict"));
}
