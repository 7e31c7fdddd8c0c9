use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};
use subround_cli::{RunManifest, EXIT_CAPACITY, EXIT_INPUT, EXIT_OK};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subround")).args(args).env_remove("SUBROUND_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", stdout(o)))
}

#[test]
fn counterexample_fails_weak_nr_with_witness() {
    let path = data("counterexample.json");
    let o = run(&["check-dependence", "--notion", "weak_nr", "--in", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let r = json(&o);
    assert_eq!(r["holds"], false);
    let w = &r["witness"];
    assert_eq!(w["kind"], "regression");
    assert_eq!(w["cond_vars"], serde_json::json!([0]));
    assert_eq!((w["a"].clone(), w["b"].clone()), (serde_json::json!([1]), serde_json::json!([2])));
    assert_eq!((w["sum_given_a"].as_f64(), w["sum_given_b"].as_f64()), (Some(1.0), Some(2.0)));

    let o = run(&["check-dependence", "--notion", "one_na", "--in", path.to_str().unwrap()]);
    assert_eq!(json(&o)["holds"], true);
}

#[test]
fn malformed_json_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"n\": 2,\n \"support\": [[0, 1]\n").unwrap();
    let o = run(&["check-dependence", "--notion", "na", "--in", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_INPUT));
    let err = stderr(&o);
    assert!(err.contains("line") && err.contains("column"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn bad_arguments_are_input_errors() {
    let table = data("counterexample.json");
    let t = table.to_str().unwrap();
    assert_eq!(run(&["check-dependence", "--notion", "na", "--in", t, "--bogus"]).status.code(), Some(EXIT_INPUT));
    assert_eq!(run(&["check-dependence", "--notion", "strong", "--in", t]).status.code(), Some(EXIT_INPUT));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(EXIT_INPUT));
    assert_eq!(run(&["check-dependence", "--notion", "na", "--in", "/no/such/file"]).status.code(), Some(EXIT_INPUT));
    assert_eq!(run(&["--help"]).status.code(), Some(EXIT_OK));
    assert_eq!(run(&["verify", "--only", "99"]).status.code(), Some(EXIT_INPUT));
}

#[test]
fn oversized_exact_distribution_is_a_capacity_error() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    std::fs::write(&x, serde_json::to_string(&vec![0.5; 11]).unwrap()).unwrap();
    let o = run(&["dist", "--in", x.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_CAPACITY));
    assert!(stderr(&o).contains("capacity"));
}

#[test]
fn dist_matches_marginals() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    std::fs::write(&x, r#"{"x": [0.5, 0.25, 0.75]}"#).unwrap();
    let o = run(&["dist", "--in", x.to_str().unwrap()]);
    let d = json(&o);
    let support = d["support"].as_array().unwrap();
    let probs = d["probs"].as_array().unwrap();
    for (i, want) in [0.5, 0.25, 0.75].iter().enumerate() {
        let got: f64 = support.iter().zip(probs).map(|(p, q)| p[i].as_f64().unwrap() * q.as_f64().unwrap()).sum();
        assert!((got - want).abs() < 1e-12);
    }
    assert!(support.iter().all(|p| p.as_array().unwrap().iter().map(|v| v.as_i64().unwrap()).sum::<i64>() >= 1));
}

#[test]
fn round_is_reproducible_and_manifested() {
    let dir = tempfile::tempdir().unwrap();
    let x = dir.path().join("x.json");
    std::fs::write(&x, "[0.5, 0.5, 0.25, 0.75]").unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let summary = dir.path().join("m.json");
    for out in [&out_a, &out_b] {
        let o = run(&[
            "round", "--in", x.to_str().unwrap(), "--trials", "500", "--seed", "9", "--out", out.to_str().unwrap(),
            "--summary", summary.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
    }
    let a = std::fs::read(&out_a).unwrap();
    assert_eq!(a, std::fs::read(&out_b).unwrap());
    let text = String::from_utf8(a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,x0,x1,x2,x3"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 500);
    assert!(rows.iter().all(|r| r.split(',').skip(1).filter(|v| *v == "1").count() == 2));

    let manifest: RunManifest =
        serde_json::from_str(&std::fs::read_to_string(RunManifest::path_for(&out_a)).unwrap()).unwrap();
    assert_eq!(manifest.command, "round");
    assert_eq!(manifest.seed, Some(9));
    assert_eq!(manifest.inputs.len(), 1);
    assert_eq!(manifest.inputs[0].sha256, hex::encode(Sha256::digest(std::fs::read(&x).unwrap())));
    let m: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(m["empirical"].as_array().unwrap().len(), 4);
}

#[test]
fn thread_count_does_not_change_results() {
    let path = data("coverage20.json");
    let args = ["tail", "--in", path.to_str().unwrap(), "--trials", "5000", "--seed", "3"];
    let base = run(&args);
    let capped = Command::new(env!("CARGO_BIN_EXE_subround")).args(args).env("SUBROUND_THREADS", "1").output().unwrap();
    assert_eq!(base.stdout, capped.stdout);
    let bad = Command::new(env!("CARGO_BIN_EXE_subround")).args(args).env("SUBROUND_THREADS", "zero").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_INPUT));
}

#[test]
fn tail_csv_round_trips_floats() {
    let path = data("coverage20.json");
    let o = run(&["tail", "--in", path.to_str().unwrap(), "--trials", "20000", "--deltas", "0.1,0.3", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,empirical,stderr,bound,ok"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.1);
    assert_eq!(rows[1][0].parse::<f64>().unwrap(), 0.3);
    assert!(rows.iter().all(|r| r[4] == "true"));
}

#[test]
fn readk_on_bundled_family() {
    let path = data("read2_family.json");
    let o = run(&["readk", "--in", path.to_str().unwrap(), "--trials", "20000", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
    assert!(stderr(&o).contains("k = 2"));
}

#[test]
fn solve_bundled_instance() {
    let path = data("fair_coverage.json");
    let o = run(&["solve-fair-coverage", "--in", path.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stderr(&o));
    let out = json(&o);
    assert_eq!(out["kind"], "solution");
    assert_eq!(out["set"].as_array().unwrap().len(), 10);
    assert_eq!(out, json(&run(&["solve-fair-coverage", "--in", path.to_str().unwrap(), "--seed", "3"])));
}

#[test]
fn unattainable_targets_give_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    std::fs::write(
        &inst,
        r#"{"coverage": {"universe_size": 3, "sets": [[0], [1], [2]]}, "objectives": [[0, 1, 2]], "k": 2, "targets": [7.0], "eps": 0.5}"#,
    )
    .unwrap();
    let o = run(&["solve-fair-coverage", "--in", inst.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let out = json(&o);
    assert_eq!(out["kind"], "infeasible");
    assert_eq!(out["certificate"]["stage"], "stage1");
}

#[test]
fn verify_subset_prints_table() {
    let o = run(&["verify", "--only", "1,7"]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("PASS [ 1]") && text.contains("PASS [ 7]"));
    assert!(text.contains("2/2 criteria passed"));
}

#[test]
fn bundled_files_match_generators() {
    let cov: Value = serde_json::from_str(&std::fs::read_to_string(data("coverage20.json")).unwrap()).unwrap();
    let spec = serde_json::to_value(subround::verify::coverage20().to_spec()).unwrap();
    assert_eq!(cov["coverage"], spec);
    let x: Vec<f64> = serde_json::from_value(cov["x"].clone()).unwrap();
    assert_eq!(x, subround::verify::coverage20_point().as_slice());
    let table = subround::negdep::JointTable::from_json(&std::fs::read_to_string(data("counterexample.json")).unwrap()).unwrap();
    assert_eq!(table, subround::negdep::counterexample_distribution());
}
