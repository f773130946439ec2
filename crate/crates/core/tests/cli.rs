// Copyright 2026 The shfsim Authors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn shfsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shfsim")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn run_succeeds_and_reports_fidelity() {
    let path = scenario("bell_a.toml");
    let out = shfsim(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["command"], "run");
    let f = v["metrics"]["fidelity"].as_f64().unwrap();
    assert!((f - 1.0).abs() < 1e-9);
    assert!(v["levels"].is_object());
}

#[test]
fn missed_floor_exits_one() {
    let path = scenario("cnot_demo.toml");
    let args = ["run", "--scenario", path.to_str().unwrap(), "--pulse-model", "rabi"];
    let out = shfsim(&[&args[..], &["--fail-below", "0.9999999"]].concat());
    assert_eq!(out.status.code(), Some(1));
    // The bundle is still written.
    assert_eq!(json(&out)["fidelity_floor"]["passed"], false);
    let out = shfsim(&[&args[..], &["--fail-below", "0.999"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let out = shfsim(&[&args[..], &["--fail-below", "1.5"]].concat());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_exit_two() {
    assert_eq!(shfsim(&["run"]).status.code(), Some(2));
    assert_eq!(shfsim(&["run", "--scenario", "/nonexistent.toml"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[system]\ng_electron = 2.0\nfield_tesla = 0.35\nbogus = 1\n").unwrap();
    assert_eq!(shfsim(&["levels", "--scenario", bad.to_str().unwrap()]).status.code(), Some(2));

    let levels_only = scenario("levels_single.toml");
    let out = shfsim(&["check", "--scenario", levels_only.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(shfsim(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("levels.json");
    let path = scenario("levels_single.toml");
    let out = shfsim(&["levels", "--scenario", path.to_str().unwrap(), "--out", dest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&dest).unwrap()).unwrap();
    assert_eq!(v["levels"]["levels"].as_array().unwrap().len(), 4);
}

#[test]
fn bundle_scenario_round_trips() {
    let path = scenario("deutsch_jozsa.toml");
    let first = shfsim(&["run", "--scenario", path.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0));
    let v = json(&first);

    // Feed the echoed scenario back in and expect the same bundle.
    let echoed: shfsim::scenario::Scenario = serde_json::from_value(v["scenario"].clone()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let again = dir.path().join("again.toml");
    std::fs::write(&again, toml::to_string(&echoed).unwrap()).unwrap();
    let second = shfsim(&["run", "--scenario", again.to_str().unwrap()]);
    assert_eq!(second.status.code(), Some(0), "{}", String::from_utf8_lossy(&second.stderr));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn seed_override_is_recorded() {
    let path = scenario("deutsch_jozsa.toml");
    let out = shfsim(&["run", "--scenario", path.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(json(&out)["seed"], 7);
}

#[test]
fn sweep_csv_has_one_row_per_value() {
    let path = scenario("mach_zehnder.toml");
    let out = shfsim(&[
        "sweep",
        "--scenario",
        path.to_str().unwrap(),
        "--param",
        "protocol.phi",
        "--values",
        "3.141592653589793,0,1.5707963267948966",
        "--format",
        "table",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let headers = reader.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "value").unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    // Sorted by value.
    let values: Vec<f64> = rows.iter().map(|r| r[col].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn pulse_model_flag_switches_to_rabi() {
    let path = scenario("cnot_demo.toml");
    let out = shfsim(&["run", "--scenario", path.to_str().unwrap(), "--pulse-model", "rabi"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["scenario"]["pulse_model"], "rabi_numeric");
    let f = v["metrics"]["fidelity"].as_f64().unwrap();
    assert!(f >= 0.999 && f < 1.0);
}

#[test]
fn table_format_is_text() {
    let path = scenario("check_upper.toml");
    let out = shfsim(&["check", "--scenario", path.to_str().unwrap(), "--format", "table"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(serde_json::from_str::<Value>(&text).is_err());
    assert!(text.contains("preskill"));
}
