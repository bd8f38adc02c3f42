use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wce(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wce"))
        .args(args)
        .env("WCE_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = wce(args);
    assert!(
        out.status.success(),
        "wce {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_dist(dir: &TempDir, name: &str, n: usize, pairs: &[(&[usize], &[usize])]) -> PathBuf {
    let pairs: Vec<Value> = pairs
        .iter()
        .map(|(a, b)| serde_json::json!({ "A": a, "B": b }))
        .collect();
    let path = dir.path().join(name);
    fs::write(&path, serde_json::json!({ "n": n, "pairs": pairs }).to_string()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_selective_enumerates_pairs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sel.json");
    let stdout = ok(&["generate", "selective", "--out", s(&out)]);
    assert!(stdout.trim().ends_with(" 129"), "{stdout}");
    let dist = read_json(&out);
    assert_eq!(dist["n"], 32);
    assert_eq!(dist["pairs"].as_array().unwrap().len(), 129);
    let meta = read_json(&dir.path().join("sel.meta.json"));
    assert_eq!(meta["windows"].as_array().unwrap().len(), 129);
}

#[test]
fn generate_importance_and_snowball_defaults() {
    let dir = TempDir::new().unwrap();
    let imp = dir.path().join("imp.json");
    ok(&["generate", "importance", "--out", s(&imp), "--seed", "3"]);
    assert_eq!(read_json(&imp)["pairs"].as_array().unwrap().len(), 2000);
    let meta = read_json(&dir.path().join("imp.meta.json"));
    assert_eq!(meta["groups"]["groups"].as_array().unwrap().len(), 2);
    let probs = meta["groups"]["inclusion_prob"].as_array().unwrap();
    assert_eq!(probs.len(), 50);
    assert_eq!((probs[0].as_f64(), probs[49].as_f64()), (Some(0.1), Some(0.5)));

    let snow = dir.path().join("snow.json");
    ok(&["generate", "snowball", "--out", s(&snow), "--m", "40", "--seed", "1"]);
    let dist = read_json(&snow);
    for pair in dist["pairs"].as_array().unwrap() {
        assert_eq!(pair["A"].as_array().unwrap().len(), 25);
        assert_eq!(pair["B"].as_array().unwrap().len(), 50);
    }
}

#[test]
fn generate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        ok(&["generate", "importance", "--out", s(p), "--m", "100", "--seed", "9"]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn optimize_exact_toy_reaches_zero_and_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let input = write_dist(&dir, "toy.json", 4, &[(&[0, 1], &[0, 1]), (&[2, 3], &[3]), (&[0, 2, 3], &[2])]);
    for regime in ["l2", "linf"] {
        let first = dir.path().join(format!("{regime}-1"));
        let second = dir.path().join(format!("{regime}-2"));
        for out in [&first, &second] {
            ok(&["optimize", s(&input), "--regime", regime, "--t-max", "50", "--out-dir", s(out)]);
        }
        let summary = read_json(&first.join("summary.json"));
        assert!(summary["best_value"].as_f64().unwrap().abs() <= 1e-9, "{summary}");
        assert_eq!(
            fs::read(first.join("estimator.json")).unwrap(),
            fs::read(second.join("estimator.json")).unwrap()
        );
        let trace = fs::read_to_string(first.join("trace.csv")).unwrap();
        assert!(trace.starts_with("t,eta,f_t,lambda,elapsed_ms\n"));
    }
}

#[test]
fn evaluate_sample_mean_on_constant_is_zero() {
    let dir = TempDir::new().unwrap();
    let input = write_dist(&dir, "d.json", 3, &[(&[0], &[0, 1, 2]), (&[1, 2], &[0])]);
    let csv = ok(&[
        "evaluate",
        s(&input),
        "--estimator",
        "sample_mean",
        "--dataset",
        "constant",
        "--dataset",
        "worst-l2",
    ]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("estimator,dataset,error"));
    let constant = lines.next().unwrap();
    assert!(constant.starts_with("sample_mean,constant,"));
    let value: f64 = constant.rsplit(',').next().unwrap().parse().unwrap();
    assert!(value.abs() < 1e-12);
    let worst: f64 = lines.next().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(worst > 0.0);
}

#[test]
fn lowerbound_half_split_and_full_set() {
    let dir = TempDir::new().unwrap();
    let split = write_dist(&dir, "split.json", 4, &[(&[0], &[2, 3]), (&[1], &[2]), (&[0, 1], &[3])]);
    let report: Value = serde_json::from_str(&ok(&["lowerbound", s(&split), "--estimator", "sample_mean"])).unwrap();
    assert_eq!(report["certificate"]["alpha"], 1.0);
    let achieved = report["adversary"]["achieved_error"].as_f64().unwrap();
    assert!(achieved >= 0.25, "{achieved}");

    let full: Value =
        serde_json::from_str(&ok(&["lowerbound", s(&split), "--set", "0,1,2,3"])).unwrap();
    assert_eq!(full["certificate"]["alpha"], 0.0);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let bad_index = write_dist(&dir, "bad.json", 2, &[(&[0], &[5])]);
    assert_eq!(wce(&["lowerbound", s(&bad_index)]).status.code(), Some(4));

    let empty_target = write_dist(&dir, "empty.json", 2, &[(&[0], &[])]);
    assert_eq!(wce(&["lowerbound", s(&empty_target)]).status.code(), Some(5));

    let missing = dir.path().join("missing.json");
    assert_eq!(wce(&["lowerbound", s(&missing)]).status.code(), Some(23));

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(wce(&["lowerbound", s(&garbage)]).status.code(), Some(3));

    let ok_dist = write_dist(&dir, "ok.json", 2, &[(&[0], &[1])]);
    let out = wce(&["evaluate", s(&ok_dist), "--estimator", "no_such", "--dataset", "constant"]);
    assert!(!out.status.success());

    assert_eq!(wce(&["frobnicate"]).status.code(), Some(2));
}
