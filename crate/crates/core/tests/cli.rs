use std::path::Path;
use std::process::{Command, Output};

use nbhd::service::{PipelineConfig, BUNDLE_PAYLOADS, RUN_LOG, STATUS_FILE};
use serde_json::Value;

fn nbhd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbhd")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let out = nbhd(&["synth", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir.join("config.json")
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut PipelineConfig)) -> std::path::PathBuf {
    let path = synth(dir);
    let mut cfg = PipelineConfig::load(&path).unwrap();
    edit(&mut cfg);
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn status(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(STATUS_FILE)).unwrap()).unwrap()
}

#[test]
fn run_writes_a_complete_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synth(dir.path());
    let out = dir.path().join("bundle");
    let res = nbhd(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for name in BUNDLE_PAYLOADS {
        let text = std::fs::read_to_string(out.join(name)).unwrap();
        serde_json::from_str::<Value>(&text).unwrap();
    }
    assert!(out.join(RUN_LOG).exists());
    let st = status(&out);
    assert_eq!(st["complete"], true);
    assert_eq!(st["files"].as_array().unwrap().len(), BUNDLE_PAYLOADS.len());
}

#[test]
fn unknown_variable_exits_with_configuration_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |c| c.spec.independents.push("not_a_column".into()));
    let out = dir.path().join("bundle");
    let res = nbhd(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("not_a_column"));
}

#[test]
fn missing_config_exits_with_configuration_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.json");
    let res = nbhd(&["run", missing.to_str().unwrap(), "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn failing_stage_exits_with_one_and_marks_the_bundle_incomplete() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |c| c.k = Some(100_000));
    let out = dir.path().join("bundle");
    let res = nbhd(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1), "{}", String::from_utf8_lossy(&res.stderr));
    let st = status(&out);
    assert_eq!(st["complete"], false);
    assert_eq!(st["failed_stage"], "regionalize");
    assert!(out.join("local_coefficients.json").exists());
    assert!(!out.join("projection.json").exists());
}
