use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1")
}

fn bwkit(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_bwkit"))
        .args(args)
        .env_remove("BWKIT_SOLVER_TOL")
        .output()
        .expect("binary runs");
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().expect("exit code"), report)
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn diag_file(dir: &Path, name: &str, d: &[f64]) -> String {
    let n = d.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { d[i] } else { 0.0 }).collect())
        .collect();
    let v = serde_json::json!({"rows": n, "cols": n, "entries": rows});
    write(dir, name, &v.to_string())
}

fn check_passed(report: &Value, name: &str) -> bool {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .any(|c| c["name"] == name && c["passed"] == true)
}

#[test]
fn dist_of_a_file_with_itself() {
    let a = fixtures().join("A1.json");
    let a = a.to_str().unwrap();
    let (code, r) = bwkit(&["dist", a, a, "--method", "both"]);
    assert_eq!(code, 0);
    assert!(r["result"]["closed_form"]["distance_squared"].as_f64().unwrap() < 1e-9);
    assert!(r["result"]["sdp"]["distance_squared"].as_f64().unwrap() < 1e-6);
    assert!(r["result"]["deviation"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["inputs"].as_array().unwrap().len(), 2);
    assert_eq!(r["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn dist_of_diagonal_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = diag_file(dir.path(), "a.json", &[1.0, 4.0]);
    let b = diag_file(dir.path(), "b.json", &[4.0, 1.0]);
    let (code, r) = bwkit(&["dist", &a, &b, "--method", "closed"]);
    assert_eq!(code, 0);
    assert!((r["result"]["closed_form"]["distance_squared"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(r["result"].get("sdp").is_none());
}

#[test]
fn dist_of_reference_ball_solution() {
    let f = fixtures();
    let (code, r) = bwkit(&[
        "dist",
        f.join("ball_center.json").to_str().unwrap(),
        f.join("ball_solution.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!((r["result"]["closed_form"]["distance_squared"].as_f64().unwrap() - 10.0).abs() < 2e-2);
    assert!(check_passed(&r, "sdp_vs_closed_form"));
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let asym = write(
        dir.path(),
        "asym.json",
        r#"{"rows":2,"cols":2,"entries":[[1,5],[2,3]]}"#,
    );
    let (code, r) = bwkit(&["dist", &asym, &asym]);
    assert_eq!(code, 2);
    assert_eq!(r["status"], "input_error");
    let indefinite = diag_file(dir.path(), "neg.json", &[1.0, -1.0]);
    assert_eq!(bwkit(&["dist", &indefinite, &indefinite]).0, 2);
    assert_eq!(bwkit(&["dist", "/nonexistent.json", &asym]).0, 2);
    let garbage = write(dir.path(), "garbage.json", "not json");
    assert_eq!(bwkit(&["dist", &garbage, &garbage]).0, 2);
}

#[test]
fn set_dist_between_trace_sets() {
    let f = fixtures();
    let (code, r) = bwkit(&[
        "set-dist",
        f.join("trace1.json").to_str().unwrap(),
        f.join("trace2.json").to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let d2 = r["result"]["distance_squared"].as_f64().unwrap();
    assert!((d2 - (2f64.sqrt() - 1.0).powi(2)).abs() < 1e-3);
    assert!(!r["result"]["objective_history"].as_array().unwrap().is_empty());
    assert_eq!(r["result"]["witness_a"]["rows"], 5);
    assert_eq!(r["settings"]["tol"], 1e-7);
}

#[test]
fn set_dist_of_identical_and_infeasible_specs() {
    let dir = tempfile::tempdir().unwrap();
    let s = write(dir.path(), "s.json", r#"{"dimension":3,"trace_eq":1.0}"#);
    let (code, r) = bwkit(&["set-dist", &s, &s]);
    assert_eq!(code, 0);
    assert!(r["result"]["distance_squared"].as_f64().unwrap() < 1e-7);
    let bad = write(dir.path(), "bad.json", r#"{"dimension":3,"trace_eq":-1.0}"#);
    let (code, r) = bwkit(&["set-dist", &s, &bad]);
    assert_eq!(code, 2);
    assert!(r["error"].as_str().unwrap().contains("infeasible"));
}

#[test]
fn set_spec_with_inline_and_relative_matrices() {
    let dir = tempfile::tempdir().unwrap();
    diag_file(dir.path(), "center.json", &[3.0, 1.0]);
    let a = write(
        dir.path(),
        "a.json",
        r#"{"dimension":2,"linear_ineqs":[{"coef":{"rows":2,"cols":2,"entries":[[1,0],[0,0]]},"rhs":0.5}],
            "trace_eq":1.0}"#,
    );
    let b = write(
        dir.path(),
        "b.json",
        r#"{"dimension":2,"frobenius_ball":{"center":"center.json","radius":0.5}}"#,
    );
    let (code, r) = bwkit(&["set-dist", &a, &b]);
    assert_eq!(code, 0, "{r}");
    assert_eq!(r["inputs"].as_array().unwrap().len(), 3);
    assert!(r["result"]["distance_squared"].as_f64().unwrap() > 0.1);
}

#[test]
fn barycenter_of_reference_problem() {
    let f = fixtures();
    let (code, r) = bwkit(&["barycenter", f.join("barycenter.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(r["result"]["max_entry_deviation"].as_f64().unwrap() <= 2e-3);
    assert_eq!(r["inputs"].as_array().unwrap().len(), 6);
}

#[test]
fn barycenter_small_cases() {
    let dir = tempfile::tempdir().unwrap();
    diag_file(dir.path(), "one.json", &[1.0]);
    diag_file(dir.path(), "nine.json", &[9.0]);
    let p = write(
        dir.path(),
        "p.json",
        r#"{"weights":[1,1],"matrices":["one.json","nine.json"]}"#,
    );
    let (code, r) = bwkit(&["barycenter", &p, "--route", "both"]);
    assert_eq!(code, 0);
    let x = r["result"]["fixed_point"]["x"]["entries"][0][0].as_f64().unwrap();
    assert!((x - 4.0).abs() < 1e-9);
    let x = r["result"]["sdp"]["x"]["entries"][0][0].as_f64().unwrap();
    assert!((x - 4.0).abs() < 1e-5);
    let single = write(
        dir.path(),
        "single.json",
        r#"{"weights":[2.5],"matrices":[{"rows":2,"cols":2,"entries":[[2,0.5],[0.5,1]]}]}"#,
    );
    let (code, r) = bwkit(&["barycenter", &single, "--route", "sdp"]);
    assert_eq!(code, 0);
    assert!((r["result"]["sdp"]["x"]["entries"][0][1].as_f64().unwrap() - 0.5).abs() < 1e-5);
    assert!(r["result"].get("fixed_point").is_none());
}

#[test]
fn ball_solve_cases() {
    let f = fixtures();
    let (code, r) = bwkit(&["ball-solve", f.join("balls.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((r["result"]["ball_distances_squared"][0].as_f64().unwrap() - 10.0).abs() < 2e-2);

    let dir = tempfile::tempdir().unwrap();
    diag_file(dir.path(), "eye.json", &[1.0, 1.0]);
    let b = write(
        dir.path(),
        "b.json",
        r#"{"balls":[{"center":"eye.json","radius_squared":2.0}]}"#,
    );
    let (code, r) = bwkit(&["ball-solve", &b]);
    assert_eq!(code, 0);
    assert!(r["result"]["value"].as_f64().unwrap() < 1e-4);
    let tiny = write(
        dir.path(),
        "tiny.json",
        r#"{"balls":[{"center":"eye.json","radius_squared":1e-6}]}"#,
    );
    let (code, r) = bwkit(&["ball-solve", &tiny, "--objective", "trace"]);
    assert_eq!(code, 0);
    assert!((r["result"]["value"].as_f64().unwrap() - 2.0).abs() < 1e-2);
    assert_eq!(bwkit(&["ball-solve", &tiny, "--objective", "linear"]).0, 2);
    let none = write(dir.path(), "none.json", r#"{"balls":[]}"#);
    assert_eq!(bwkit(&["ball-solve", &none]).0, 2);
}

#[test]
fn gen_is_deterministic() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let run = |d: &Path, cond: &str| {
        bwkit(&[
            "gen",
            "--n",
            "5",
            "--seed",
            "42",
            "--cond",
            cond,
            "--count",
            "3",
            "--out-dir",
            d.to_str().unwrap(),
        ])
    };
    let (code, r) = run(d1.path(), "100");
    assert_eq!(code, 0, "{r}");
    assert_eq!(run(d2.path(), "100").0, 0);
    for i in 0..3 {
        let name = format!("matrix_{i:03}.json");
        assert_eq!(
            fs::read(d1.path().join(&name)).unwrap(),
            fs::read(d2.path().join(&name)).unwrap()
        );
    }
    let d3 = tempfile::tempdir().unwrap();
    let (code, r) = run(d3.path(), "1");
    assert_eq!(code, 0);
    let cond = r["checks"][0]["value"].as_f64().unwrap();
    assert!((cond - 1.0).abs() < 1e-9);
    assert_eq!(
        bwkit(&[
            "gen",
            "--n",
            "2",
            "--cond",
            "0.5",
            "--out-dir",
            d3.path().to_str().unwrap()
        ])
        .0,
        2
    );
}

#[test]
fn reports_are_deterministic_modulo_duration() {
    let f = fixtures();
    let (a, b) = (f.join("trace1.json"), f.join("trace2.json"));
    let args = ["set-dist", a.to_str().unwrap(), b.to_str().unwrap()];
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("duration_seconds");
        v
    };
    assert_eq!(strip(bwkit(&args).1), strip(bwkit(&args).1));
}

#[test]
fn check_suites_pass() {
    for suite in ["metric", "lemma", "table1"] {
        let (code, r) = bwkit(&["check", "--suite", suite]);
        assert_eq!(code, 0, "{suite}: {r}");
        assert!(r["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
    }
}

#[test]
fn solver_tolerance_from_environment_and_flag() {
    let f = fixtures().join("A1.json");
    let a = f.to_str().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bwkit"))
        .args(["dist", a, a])
        .env("BWKIT_SOLVER_TOL", "1e-6")
        .output()
        .unwrap();
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["settings"]["gap_tolerance"], 1e-6);
    let (_, r) = bwkit(&["dist", a, a, "--solver-tol", "1e-7"]);
    assert_eq!(r["settings"]["feasibility_tolerance"], 1e-7);
    assert_eq!(bwkit(&["dist", a, a, "--solver-tol", "2"]).0, 2);
}

#[test]
fn report_written_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let a = fixtures().join("A2.json");
    let (code, _) = bwkit(&[
        "dist",
        a.to_str().unwrap(),
        a.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["command"], "dist");
}
