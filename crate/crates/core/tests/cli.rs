mod common;

use std::path::Path;
use std::process::{Command, Output};

use drgap::corpus::DatasetId;
use drgap::harness::RunConfig;

fn drgap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drgap"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let source = common::write_source(dir, &common::paired(DatasetId::Winobias, 6));
    let mut cfg = RunConfig::new(common::marker_target(), vec![source], dir.join("runs"));
    cfg.reference = Some(common::scripted_reference());
    cfg.repetitions = 1;
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn missing_config_exits_with_configuration_code() {
    let out = drgap(&["eval", "--config", "/nonexistent/drgap.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}

#[test]
fn unknown_prompt_mode_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = drgap(&["eval", "--config", &cfg, "--prompt-mode", "sorcery"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_drgap_and_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let runs = dir.path().join("runs");

    let out = drgap(&["eval", "--config", &cfg, "--run-id", "plain", "--sequential"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("acc_gap=100.0000"));

    let out = drgap(&["drgap", "--config", &cfg, "--run-id", "mitigated", "--rounds", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("delta_bias=1.0000"));

    let table = dir.path().join("table.csv");
    let out = drgap(&[
        "report",
        runs.join("plain").to_str().unwrap(),
        runs.join("mitigated").to_str().unwrap(),
        "--format",
        "csv",
        "--output",
        table.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(table).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.lines().nth(2).unwrap().starts_with("drgap,"), "{csv}");
}
