use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ralm(args: &[&str]) -> Output {
    ralm_env(args, None)
}

fn ralm_env(args: &[&str], builtin_dir: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ralm"));
    cmd.args(args).env_remove("RALM_BUILTIN_DIR");
    if let Some(d) = builtin_dir {
        cmd.env("RALM_BUILTIN_DIR", d);
    }
    cmd.output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn verdict_of(report: &Value, condition: &str) -> String {
    report["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["condition"] == condition)
        .unwrap_or_else(|| panic!("no {condition}"))["verdict"]
        .as_str()
        .unwrap()
        .to_string()
}

const UNCONSTRAINED: &str = r#"
name = "free-height"
description = "height on the sphere, no constraints"
manifold = "sphere:3"
variables = ["x", "y", "z"]
objective = "z"
start = [0.0, 0.6, 0.8]
reference = [0.0, 0.0, 1.0]
"#;

#[test]
fn solve_equator_exits_zero_at_the_equator() {
    let dir = tempfile::tempdir().unwrap();
    let out = ralm(&["solve", "--problem", "equator-lp", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let s = json(&out);
    assert_eq!(s["verdict"], "KktApprox");
    assert!(s["point"][2].as_f64().unwrap().abs() <= 1e-6);
    assert!(dir.path().join("equator-lp.trace.csv").is_file());
}

#[test]
fn solve_infeasible_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = ralm(&["solve", "--problem", "infeasible-height", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["verdict"], "InfeasibleStationary");
}

#[test]
fn solver_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = ralm(&[
        "solve", "--problem", "paper-cpld-sphere", "--max-outer", "1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["verdict"], "IterLimit");
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = ralm(&["solve", "--problem", "equator-lp", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(ralm(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(ralm(&["--help"]).status.code(), Some(0));
}

#[test]
fn certify_cpld_sphere() {
    let out = ralm(&["certify", "--problem", "paper-cpld-sphere", "--point", "0,0,1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(verdict_of(&r, "LICQ"), "Fails");
    assert_eq!(verdict_of(&r, "MFCQ"), "Fails");
    assert_eq!(verdict_of(&r, "CRCQ"), "EvidenceFails");
    assert_eq!(verdict_of(&r, "CPLD"), "EvidenceHolds");
    assert_eq!(r["j_minus"], serde_json::json!([3, 4]));
    let crcq = r["conditions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|e| e["condition"] == "CRCQ")
        .unwrap();
    for key in ["eps", "samples", "seed"] {
        assert!(crcq.get(key).is_some(), "missing {key}");
    }
    assert!(crcq["witness"].get("alpha").is_some() && crcq["witness"].get("beta").is_some());
}

#[test]
fn certify_crsc_sphere() {
    let r = json(&ralm(&["certify", "--problem", "paper-crsc-sphere"]));
    assert_eq!(verdict_of(&r, "RCPLD"), "EvidenceFails");
    assert_eq!(verdict_of(&r, "CRSC"), "EvidenceHolds");
    assert_eq!(r["j_minus"], serde_json::json!([1, 2, 3, 4]));
}

#[test]
fn certify_unconstrained_file_holds_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("free.toml");
    std::fs::write(&path, UNCONSTRAINED).unwrap();
    let r = json(&ralm(&["certify", "--problem", path.to_str().unwrap()]));
    for e in r["conditions"].as_array().unwrap() {
        let v = e["verdict"].as_str().unwrap();
        assert!(v == "Holds" || v == "EvidenceHolds", "{e}");
    }
}

#[test]
fn certify_infeasible_point_exits_five() {
    let out = ralm(&["certify", "--problem", "equator-lp", "--point", "0,0,-1"]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn certify_after_solving() {
    let out = ralm(&["certify", "--problem", "equator-lp", "--solve-first", "--cq-samples", "16", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(verdict_of(&r, "LICQ"), "Holds");
    assert!(r["point"][2].as_f64().unwrap().abs() <= 1e-6);
}

#[test]
fn solve_then_analyze_reports_akkt() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(ralm(&["solve", "--problem", "equator-lp", "--out", d]).status.code(), Some(0));
    let trace = dir.path().join("equator-lp.trace.csv");
    let out = ralm(&["analyze", "--problem", "equator-lp", "--trace", trace.to_str().unwrap(), "--tol", "1e-5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["akkt"]["satisfied"], true);
    assert_eq!(r["dual_bounded"], true);
}

#[test]
fn truncated_trace_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ralm(&["solve", "--problem", "equator-lp", "--out", d]);
    let trace = dir.path().join("equator-lp.trace.csv");
    let text = std::fs::read_to_string(&trace).unwrap();
    std::fs::write(&trace, &text[..text.len() - 30]).unwrap();
    let out = ralm(&["analyze", "--problem", "equator-lp", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    let missing = ralm(&["analyze", "--problem", "equator-lp", "--trace", "/nonexistent/t.csv"]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn mismatched_problem_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ralm(&["solve", "--problem", "equator-lp", "--out", d]);
    let trace = dir.path().join("equator-lp.trace.csv");
    let out = ralm(&["analyze", "--problem", "paper-qn-sphere", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn single_row_trace_is_analyzed() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    ralm(&["solve", "--problem", "equator-lp", "--out", d]);
    let trace = dir.path().join("equator-lp.trace.csv");
    let text = std::fs::read_to_string(&trace).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    std::fs::write(&trace, format!("{}\n{}\n", lines[0], lines[lines.len() - 1])).unwrap();
    let out = ralm(&["analyze", "--problem", "equator-lp", "--trace", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["trace_len"], 1);
}

#[test]
fn load_errors() {
    let out = ralm(&["solve", "--problem", "/nonexistent/problem.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, UNCONSTRAINED.replace("objective = \"z\"", "objective = \"z * (\"")).unwrap();
    let out = ralm(&["certify", "--problem", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("objective") && err.contains("byte 5"), "{err}");
}

#[test]
fn extra_builtin_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("free.toml"), UNCONSTRAINED).unwrap();
    let list = ralm_env(&["list-problems"], Some(dir.path()));
    let text = String::from_utf8_lossy(&list.stdout);
    assert!(text.contains("free-height") && text.contains("equator-lp"));
    let out_dir = tempfile::tempdir().unwrap();
    let out = ralm_env(
        &["solve", "--problem", "free-height", "--out", out_dir.path().to_str().unwrap()],
        Some(dir.path()),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["point"][2].as_f64().unwrap() < -0.999);
}

#[test]
fn every_builtin_solves_or_certifies() {
    let list = ralm(&["list-problems"]);
    let text = String::from_utf8_lossy(&list.stdout).to_string();
    let dir = tempfile::tempdir().unwrap();
    for line in text.lines() {
        let name = line.split('\t').next().unwrap();
        let solved = ralm(&["solve", "--problem", name, "--out", dir.path().to_str().unwrap()]);
        assert!(matches!(solved.status.code(), Some(0 | 2)), "{name}");
        if name != "infeasible-height" {
            assert_eq!(ralm(&["certify", "--problem", name]).status.code(), Some(0), "{name}");
        }
    }
}

#[test]
fn repeated_solves_write_identical_traces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ralm(&["solve", "--problem", "paper-crsc-sphere", "--rho1", "2", "--out", d.path().to_str().unwrap()]);
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("paper-crsc-sphere.trace.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}
