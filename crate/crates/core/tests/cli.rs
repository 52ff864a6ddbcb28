use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recoil-ent")).args(args).output().unwrap()
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("--eta"));
}

#[test]
fn usage_errors_exit_one_with_single_line() {
    for args in [&["frobnicate"][..], &["ratio", "--eta", "-1"], &["ratio", "--tau", "x"], &["ratio", "--n", "4"]] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(err.trim_end().lines().count(), 1, "{args:?}: {err}");
    }
}

#[test]
fn unwritable_output_exits_one() {
    let out = run(&["ratio", "--n", "64", "--out", "/nonexistent-dir/x.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two() {
    // conditioning far in the Gaussian tail leaves an empty slice
    let out = run(&["ratio", "--n", "200", "--axis", "k", "--fixed", "59.5"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ratio_json_has_expected_shape() {
    let out = run(&["ratio", "--eta", "10", "--tau", "1", "--n", "400"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["config"]["command"], "ratio");
    assert_eq!(doc["config"]["eta"], 10.0);
    let columns = doc["results"]["ratio"]["columns"].as_array().unwrap();
    let ratio_col = columns.iter().position(|c| c == "ratio").unwrap();
    let r = doc["results"]["ratio"]["rows"][0][ratio_col].as_f64().unwrap();
    assert!((r / 5.7978845608 - 1.0).abs() < 0.05, "{r}");
    assert!(doc["diagnostics"]["n_q"].as_u64().unwrap() >= 400);
}

#[test]
fn config_file_replays_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.csv");
    let out = run(&[
        "schmidt",
        "--n",
        "120",
        "--eta",
        "6",
        "--modes",
        "2",
        "--format",
        "csv",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&first).unwrap();
    let config_line = text.lines().find_map(|l| l.strip_prefix("# config: ")).unwrap();
    let cfg_path = dir.path().join("run.json");
    std::fs::write(&cfg_path, config_line).unwrap();

    let out = run(&["--config", cfg_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&first).unwrap(), text);
    assert!(text.contains("# table: photon_modes\nk,phi0_re,phi0_im,phi0_abs2,phi1_re"));
}

#[test]
fn converge_reports_ladder() {
    let out = run(&["converge", "--n", "80", "--eta", "4"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = doc["results"]["converge"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0][7].is_null());
    assert!(rows[2][7].as_f64().unwrap().abs() < 0.05);
}
