use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn fplap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fplap"))
        .current_dir(dir)
        .env_remove("FRACPLAP_OUTPUT_DIR")
        .env_remove("FRACPLAP_WORKERS")
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(v).unwrap()).unwrap();
    path
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Nodes `-m..=m` at spacing `h` on the line.
fn line_function(dir: &Path, name: &str, h: f64, m: i64, exterior: Value, f: impl Fn(f64) -> f64) -> PathBuf {
    let values: Vec<f64> = (-m..=m).map(|k| f(k as f64 * h)).collect();
    write(dir, name, &json!({"n": 1, "h": h, "extent": [[-m, m]], "exterior": exterior, "values": values}))
}

fn params(s: f64, p: f64) -> Value {
    json!({"n": 1, "s": s, "p": p})
}

#[test]
fn eval_of_a_constant_is_zero() {
    let tmp = TempDir::new().unwrap();
    line_function(tmp.path(), "u.json", 0.125, 16, json!({"kind": "Constant", "value": 2.0}), |_| 2.0);
    let cfg = write(tmp.path(), "eval.json", &json!({"input": "u.json", "params": params(0.5, 3.0)}));
    let out = fplap(tmp.path(), &["eval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let lines: Vec<Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    for r in &lines {
        assert_eq!(r["value"].as_f64().unwrap(), 0.0, "{r}");
    }
}

#[test]
fn malformed_json_reports_offset() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("bad.json"), "{\"input\": \"u.json\",, }").unwrap();
    let out = fplap(tmp.path(), &["eval", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("byte 19"), "{}", stderr(&out));
}

#[test]
fn out_of_regime_exponents_exit_three() {
    let tmp = TempDir::new().unwrap();
    line_function(tmp.path(), "u.json", 0.125, 16, json!({"kind": "Zero"}), |x| (1.0 - x * x).max(0.0));
    write(tmp.path(), "eval.json", &json!({"input": "u.json", "params": params(0.9, 1.5)}));
    let out = fplap(tmp.path(), &["eval", "--config", "eval.json"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("InvalidRegime"), "{}", stderr(&out));
}

#[test]
fn zero_rhs_gives_zero_solution() {
    let tmp = TempDir::new().unwrap();
    line_function(tmp.path(), "f.json", 1.0 / 32.0, 40, json!({"kind": "Zero"}), |_| 0.0);
    write(tmp.path(), "solve.json", &json!({
        "problem": {"kind": "dirichlet", "rhs": "f.json"},
        "params": params(0.5, 3.0),
    }));
    let out = fplap(tmp.path(), &["--out", "res", "solve", "--config", "solve.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let sol = read(&tmp.path().join("res/solution.json"));
    assert!(sol["values"].as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0)));
    assert!(tmp.path().join("res/solution.csv").exists());
}

fn ball_problem(dir: &Path, max_iters: usize) {
    write(dir, "ball.json", &json!({
        "problem": {"kind": "ball-power", "q": 2.0, "h": 1.0 / 32.0},
        "params": params(0.5, 3.0),
        "solve": {"max_iters": max_iters},
    }));
}

#[test]
fn ball_solve_writes_sidecar_with_mu() {
    let tmp = TempDir::new().unwrap();
    ball_problem(tmp.path(), 50_000);
    let out = fplap(tmp.path(), &["--out", "ball", "solve", "--config", "ball.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let side = read(&tmp.path().join("ball/solution.sidecar.json"));
    assert_eq!(side["converged"], json!(true));
    assert!(side["mu"].as_f64().unwrap() > 0.0, "{side}");
}

#[test]
fn iteration_cap_exits_four_with_best_iterate() {
    let tmp = TempDir::new().unwrap();
    ball_problem(tmp.path(), 1);
    let out = fplap(tmp.path(), &["--out", "ball", "solve", "--config", "ball.json"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let side = read(&tmp.path().join("ball/solution.sidecar.json"));
    assert_eq!(side["converged"], json!(false));
    assert!(tmp.path().join("ball/solution.json").exists());
}

#[test]
fn lemma_suite_at_fixed_p() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "lemma.json", &json!({"suite": "lemma", "p": 3.0, "samples": 20000}));
    let out = fplap(tmp.path(), &["--out", "v", "verify", "--config", "lemma.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(tmp.path().join("v/lemma/report.json").exists());
    assert!(tmp.path().join("v/lemma/summary.csv").exists());
}

#[test]
fn simple_mp_suite_by_name() {
    let tmp = TempDir::new().unwrap();
    let out = fplap(tmp.path(), &["--out", "v", "verify", "--suite", "simple-mp"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let report = read(&tmp.path().join("v/simple-mp/report.json"));
    assert!(report.is_object());
}

#[test]
fn unknown_suite_exits_two() {
    let tmp = TempDir::new().unwrap();
    let out = fplap(tmp.path(), &["verify", "--suite", "no-such-suite"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown suite"));
}

#[test]
fn output_is_independent_of_worker_count() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "lemma.json", &json!({"suite": "lemma", "samples": 2000}));
    let mut seen: Option<(Vec<u8>, Vec<u8>)> = None;
    for w in ["1", "4", "8"] {
        let out = Command::new(env!("CARGO_BIN_EXE_fplap"))
            .current_dir(tmp.path())
            .env("FRACPLAP_WORKERS", w)
            .env("FRACPLAP_OUTPUT_DIR", format!("w{w}"))
            .args(["verify", "--config", "lemma.json"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let dir = tmp.path().join(format!("w{w}/lemma"));
        let bytes = (
            std::fs::read(dir.join("report.json")).unwrap(),
            std::fs::read(dir.join("summary.csv")).unwrap(),
        );
        match &seen {
            None => seen = Some(bytes),
            Some(first) => assert!(*first == bytes, "workers {w} differ"),
        }
    }
}

#[test]
fn bad_worker_count_exits_two() {
    let tmp = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fplap"))
        .current_dir(tmp.path())
        .env("FRACPLAP_WORKERS", "many")
        .args(["verify", "--suite", "lemma"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn scan_and_report() {
    let tmp = TempDir::new().unwrap();
    line_function(tmp.path(), "u.json", 1.0 / 32.0, 40, json!({"kind": "Zero"}), |x| {
        if x.abs() < 0.9 { (1.0 - (x - 0.1).powi(2)).max(0.0) } else { 0.0 }
    });
    write(tmp.path(), "scan.json", &json!({"input": "u.json"}));
    write(tmp.path(), "report.json", &json!({"input": "u.json", "center": "auto"}));
    let out = fplap(tmp.path(), &["--out", "o", "scan", "--config", "scan.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let scans = read(&tmp.path().join("o/scan.json"));
    assert_eq!(scans.as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(tmp.path().join("o/scan.csv")).unwrap();
    assert!(csv.starts_with("dim,sign,lambda,min_w\n"));
    let out = fplap(tmp.path(), &["--out", "o", "report", "--config", "report.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(read(&tmp.path().join("o/symmetry.json")).is_object());
}
