use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn divtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_divtrace")).args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("experiment.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn gauss_green_on_disk_with_linear_field_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[shape]\nname = \"disk\"\n\n[field]\nname = \"linear\"\n");
    let out = tmp.path().join("gg");
    let o = divtrace(&["gauss-green", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["pass"], Value::Bool(true));
    for c in r["checks"].as_array().unwrap() {
        assert!(c["value"].as_f64().unwrap() < 0.02, "{c}");
    }
    assert!(out.join("gauss_green.csv").exists());
    // the parameter echo carries the grid and the schedule
    assert_eq!(r["parameters"]["grid_cells"], serde_json::json!([1024, 1024]));
    assert!(r["parameters"]["interior_band"].is_array() && r["parameters"]["exterior_band"].is_array());
    assert_eq!(r["parameters"]["config"]["schedule"]["eps"], serde_json::json!([0.2, 0.1, 0.05]));
}

#[test]
fn unknown_field_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[field]\nname = \"no_such_field\"\n");
    let o = divtrace(&["trace", "--config", &cfg, "--out", tmp.path().join("x").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("field.name"), "{err}");
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn malformed_config_and_usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nh = \"small\"\n");
    assert_eq!(divtrace(&["perimeter", "--config", &cfg]).status.code(), Some(2));
    assert_eq!(divtrace(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(divtrace(&["perimeter", "--resolution", "huge"]).status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_1() {
    // the cusp is not fat, so the inclusion theorem does not apply
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[shape]\nname = \"cusp\"\n");
    let out = tmp.path().join("fat");
    let o = divtrace(&["fatness", "--config", &cfg, "--out", out.to_str().unwrap(), "--resolution", "coarse"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let r = report(&out);
    assert_eq!(r["pass"], Value::Bool(false));
    assert!(r["results"]["error"].as_str().unwrap().contains("fat"), "{r}");
}

#[test]
fn printed_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let o = divtrace(&["perimeter", "--resolution", "fine", "--seed", "11", "--print-config"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = write_config(tmp.path(), &text);
    let again = divtrace(&["perimeter", "--config", &cfg, "--print-config"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
    assert!(text.contains("seed = 11"));
}

#[test]
fn reports_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let run = || {
        let o = divtrace(&["burgers-dissipation", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
        ["report.json", "dissipation.csv"].map(|f| fs::read(out.join(f)).unwrap())
    };
    let first = run();
    assert_eq!(first, run());
}

#[test]
fn all_writes_one_report_per_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("all");
    let o = divtrace(&["all", "--resolution", "coarse", "--out", out.to_str().unwrap()]);
    let summary = report(&out);
    let checks = summary["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 12);
    for c in checks {
        let name = c["name"].as_str().unwrap();
        let sub = report(&out.join(name));
        assert_eq!(sub["pass"], c["pass"], "{name}");
    }
    let expected = if summary["pass"] == Value::Bool(true) { 0 } else { 1 };
    assert_eq!(o.status.code(), Some(expected));
}
