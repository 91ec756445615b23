use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_nck-scma"));
    c.env("RUST_LOG", "warn");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/data/configs").join(name)
}

#[test]
fn validate_reports_dimensions() {
    let out = bin().args(["validate", "--config"]).arg(config("nck_4_2_2.json")).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("J = 6, R = 4, M = 4"), "{text}");
    assert!(text.contains("N_R = 6"), "{text}");
}

#[test]
fn missing_config_exits_with_io_code() {
    let out = bin().args(["validate", "--config", "/nonexistent/x.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ \"trials\": ").unwrap();
    let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line"));
}

#[test]
fn simulate_writes_csv_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("run.csv");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(config("kscma_3.json"))
        .args(["--trials", "2", "--snr-override", "-1:0:1", "--threads", "1", "--verbose", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 3);
    assert!(dir.path().join("run.csv.trace.csv").exists());
}

#[test]
fn oracle_suites_pass() {
    let out = bin().args(["oracle", "all"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().all(|l| l.starts_with("PASS")), "{text}");
    assert!(!bin().args(["oracle", "nope"]).status().unwrap().success());
}
