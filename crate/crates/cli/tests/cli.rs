use std::path::Path;
use std::process::{Command, Output};

fn dpv(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpv"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("cfg.json");
    std::fs::write(&path, r#"{"synthetic": {"n_instances": 4000}}"#).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    for args in [
        vec!["simulate", "--config", &cfg, "--seed", "4", "--out", "d.csv"],
        vec!["discover", "--config", &cfg, "--seed", "4", "--input", "d.csv", "--out", "m.json"],
        vec!["score", "--config", &cfg, "--input", "d.csv", "--model", "m.json", "--out", "s.csv"],
        vec!["validate", "--config", &cfg, "--seed", "4", "--input", "d.csv", "--out", "r.json"],
    ] {
        let out = dpv(dir.path(), &args);
        assert!(matches!(out.status.code(), Some(0 | 3)), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["d.csv", "d.csv.truth.json", "m.json", "m.json.log.json", "s.csv", "r.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
    let scores = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert_eq!(scores.lines().next(), Some("id,dpv"));
    assert_eq!(scores.lines().count(), 4001);
}

#[test]
fn missing_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dpv(dir.path(), &["discover", "--input", "absent.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.csv"));
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"train_fraction": 1.5}"#).unwrap();
    let out = dpv(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train_fraction"));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("typo.json");
    std::fs::write(&cfg, r#"{"sead": 3}"#).unwrap();
    let out = dpv(dir.path(), &["simulate", "--config", cfg.to_str().unwrap(), "--out", "d.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_csv_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "id,timestamp,arm,metric,x0\na,1,maybe,0.5,1\n").unwrap();
    let out = dpv(dir.path(), &["discover", "--input", "bad.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    dpv(dir.path(), &["simulate", "--config", &cfg, "--seed", "1", "--out", "a.csv"]);
    dpv(dir.path(), &["simulate", "--config", &cfg, "--seed", "2", "--out", "b.csv"]);
    dpv(dir.path(), &["simulate", "--config", &cfg, "--seed", "1", "--out", "c.csv"]);
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_ne!(read("a.csv"), read("b.csv"));
    assert_eq!(read("a.csv"), read("c.csv"));
}
