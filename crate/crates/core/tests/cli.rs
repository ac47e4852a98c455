use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hierids(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hierids"))
        .current_dir(dir)
        .env_remove("HIERIDS_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = "f1,f2,label\n0,1,BENIGN\n1,0,DoS\n1,1,BENIGN\n0,0,GAS\n";

#[test]
fn ingest_succeeds_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), SMALL).unwrap();
    let o = hierids(dir.path(), &["ingest", "--input", "a.csv", "--out", "out", "--seed", "9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("BENIGN") && stdout.contains("50.00"));
    let scaler = json(&dir.path().join("out/scaler.json"));
    assert_eq!(scaler["run_config"]["seed"], 9);
    assert_eq!(scaler["run_config"]["input"], "a.csv");
    let csv = std::fs::read_to_string(dir.path().join("out/dataset.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));
}

#[test]
fn malformed_row_exits_two_with_row_number() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "f1,f2,label\n0,1,BENIGN\n1,x,DoS\n").unwrap();
    let o = hierids(dir.path(), &["ingest", "--input", "bad.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("row 2") && err.contains("f2"), "{err}");
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), SMALL).unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"bogus": 1}"#).unwrap();
    let o = hierids(dir.path(), &["ingest", "--config", "c.json", "--input", "a.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
}

#[test]
fn bad_flag_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = hierids(dir.path(), &["train-eval", "--mode", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_input_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = hierids(dir.path(), &["ingest", "--input", "nope.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.csv"), SMALL).unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"input": "a.csv", "seed": 5, "scale": false}"#).unwrap();
    let o = hierids(dir.path(), &["ingest", "--config", "c.json", "--seed", "6", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let cfg = &json(&dir.path().join("o/scaler.json"))["run_config"];
    assert_eq!(cfg["seed"], 6);
    assert_eq!(cfg["scale"], false);
}

#[test]
fn scale_off_writes_identity_scaler_and_raw_values() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("r.csv"), "a,b,label\n0,5,BENIGN\n3,-2,DoS\n").unwrap();
    let o = hierids(
        dir.path(),
        &["ingest", "--input", "r.csv", "--feature-kind", "real", "--scale", "off", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let scaler = json(&dir.path().join("o/scaler.json"));
    assert_eq!(scaler["x_min"], serde_json::json!([0.0, 0.0]));
    assert_eq!(scaler["x_max"], serde_json::json!([1.0, 1.0]));
    let csv = std::fs::read_to_string(dir.path().join("o/dataset.csv")).unwrap();
    let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body[1], "0,5,BENIGN");
    assert_eq!(body[2], "3,-2,DOS");
}

#[test]
fn zero_stub_rate_forwards_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let o = hierids(dir.path(), &["simulate", "--stub-attack-rate", "0", "--duration", "60", "--out", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = json(&dir.path().join("s/overhead.json"));
    assert_eq!(r["forwarded_to_rsu_rate"], 0.0);
    assert!(r["per_rsu_forwarded"].as_array().unwrap().iter().all(|v| v == 0));
}

#[test]
fn two_hour_run_pushes_twice() {
    let dir = tempfile::tempdir().unwrap();
    let o = hierids(dir.path(), &["simulate", "--stub-attack-rate", "0", "--duration", "7200", "--out", "s"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(json(&dir.path().join("s/overhead.json"))["update_pushes_per_node"], 2);
}

#[test]
fn stub_rate_with_model_bundle_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = hierids(
        dir.path(),
        &["simulate", "--stub-attack-rate", "0.1", "--model-bundle", "m.json", "--data", "d.csv"],
    );
    assert_eq!(o.status.code(), Some(2));
}
