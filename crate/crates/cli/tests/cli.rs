use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn citest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citest")).args(args).output().expect("spawn citest")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_test_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("adv.csv");
    let out = citest(&["generate", "--family", "adversarial-discrete", "--rho", "0.005", "--d", "8", "--n", "1000", "--seed", "1", "--out", path(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = citest(&["test", "--mode", "fixed_discrete", "--perms", "50", path(&data)]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["statistic", "p_value", "decision", "d", "d_prime", "n_effective"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    let p = v["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert!(matches!(v["decision"].as_str(), Some("accept" | "reject")));
}

#[test]
fn generate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for f in [&a, &b] {
        let out = citest(&["generate", "--family", "continuous-alt", "--n", "300", "--seed", "9", "--out", path(f)]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let text = fs::read_to_string(&a).unwrap();
    assert!(text.starts_with("x,y,z\n"));
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn simulate_writes_table_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    let out = citest(&[
        "simulate", "--family", "discrete-null", "--sizes", "100,200", "--reps", "5", "--perms", "20",
        "--mode", "scaling_discrete", "--seed", "4", "--out", path(&table),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,rejection_rate,se,mean_T,mean_N"));
    assert_eq!(lines.count(), 2);
    let meta: Value = serde_json::from_str(&fs::read_to_string(table.with_extension("json")).unwrap()).unwrap();
    assert_eq!(meta["blocks"][0]["experiment"]["generator"]["family"], "discrete-null");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(citest(&["generate", "--family", "discrete-alt", "--n", "400", "--out", path(&data)]).status.success());
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "mode = \"scaling_discrete\"\nperms = 30\nalpha = 0.2\n").unwrap();
    let out = citest(&["test", "--config", path(&cfg), "--alpha", "0.01", path(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["mode"], "scaling_discrete");
    assert_eq!(v["config"]["alpha"], 0.01);
    assert_eq!(v["config"]["calibration"]["permutations"], 30);
}

#[test]
fn couple_round_trips_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (data, coupled) = (dir.path().join("d.csv"), dir.path().join("c.csv"));
    assert!(citest(&["generate", "--family", "continuous-alt", "--n", "200", "--seed", "2", "--out", path(&data)]).status.success());
    let out = citest(&["couple", "--m", "10", "--big-m", "1", "--seed", "5", "--out", path(&coupled), path(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&coupled).unwrap();
    assert!(text.starts_with("x,y,z\n"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn smoothness_prints_report() {
    let out = citest(&["smoothness", "--family", "discrete-null", "--class", "tv", "--grid", "64"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["class"], "tv");
    assert!(v["constant"].as_f64().unwrap() > 0.0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(citest(&["--bogus"]).status.code(), Some(1));
    assert_eq!(citest(&["generate", "--family", "nope", "--n", "10"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(citest(&["generate", "--family", "discrete-null", "--n", "50", "--out", path(&data)]).status.success());
    assert_eq!(citest(&["test", "--mode", "sideways", path(&data)]).status.code(), Some(1));
    assert_eq!(citest(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "x,y,z\n1,2,0.5\n1,oops,0.3\n").unwrap();
    let out = citest(&["test", path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 3") && err.contains("column 2"), "{err}");

    assert_eq!(citest(&["test", path(&dir.path().join("missing.csv"))]).status.code(), Some(2));

    // Categorical columns under a continuous mode.
    let data = dir.path().join("cat.csv");
    assert!(citest(&["generate", "--family", "discrete-null", "--n", "50", "--out", path(&data)]).status.success());
    assert_eq!(citest(&["test", "--mode", "continuous", "--s", "1", path(&data)]).status.code(), Some(2));
}
