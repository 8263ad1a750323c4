use std::fs;
use std::path::Path;
use std::process::Command;

use mcfc_bench::{batch_run, run_oracle, run_scenario, HarnessError, RunOptions, ScenarioSpec};

fn fixture(name: &str) -> ScenarioSpec {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.toml"));
    ScenarioSpec::load(&path).unwrap()
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out_dir: Some(dir.to_path_buf()),
        ..RunOptions::default()
    }
}

#[test]
fn records_are_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = fixture("tc1");
    run_scenario(&spec, &opts(a.path())).unwrap();
    run_scenario(&spec, &opts(b.path())).unwrap();
    for f in ["tc1.json", "tc1.pattern.csv", "tc1.trace.csv"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn pattern_file_agrees_with_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_scenario(&fixture("tc1"), &opts(dir.path())).unwrap();
    let bwt = out.record.bw_target_deg.unwrap();
    let edge = (bwt.to_radians() / 2.0).sin();

    let mut reader = csv::Reader::from_path(dir.path().join("tc1.pattern.csv")).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut rows = 0;
    for row in reader.records() {
        let row = row.unwrap();
        let u: f64 = row[0].parse().unwrap();
        let corrected: f64 = row[3].parse().unwrap();
        if u.abs() >= edge {
            worst = worst.max(corrected);
        }
        rows += 1;
    }
    assert_eq!(rows, 4001);
    let limit = out.record.target_db + out.record.constraint_tol_db;
    // The export grid differs from the constraint grid, so allow a small overshoot.
    assert!(worst <= limit + 0.1, "{worst} vs {limit}");

    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("tc1.json")).unwrap()).unwrap();
    assert_eq!(json["n_corrections"], 3);
    assert_eq!(json["support"].as_array().unwrap().len(), 3);
    assert_eq!(json["faulty_indices"], serde_json::json!([2, 3, 9]));
}

#[test]
fn infeasible_target_still_writes_record() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = fixture("toy");
    spec.metric.target_db = -100.0;
    let err = run_scenario(&spec, &opts(dir.path())).unwrap_err();
    assert!(err.is_infeasible());
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("toy.json")).unwrap()).unwrap();
    assert_eq!(json["status"], "infeasible");
    assert!(json["n_corrections"].is_null());
}

#[test]
fn oracle_record_for_toy() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run_oracle(&fixture("toy"), 2, &opts(dir.path())).unwrap();
    assert_eq!(rec.status, "minimum");
    assert_eq!(rec.support, vec![3]);
    assert!(dir.path().join("toy.oracle.json").exists());
}

#[test]
fn batch_reports_malformed_files_as_rows() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    fs::write(input.path().join("a_toy.toml"), fixture("toy").to_toml()).unwrap();
    fs::write(
        input.path().join("b_broken.toml"),
        "name = \"x\"\nn_elements = \"four\"\n",
    )
    .unwrap();
    fs::write(input.path().join("notes.txt"), "ignored").unwrap();
    let rows = batch_run(input.path(), 2, &opts(out.path())).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].file, "a_toy.toml");
    assert_eq!(rows[0].status, "ok");
    assert_eq!(rows[0].n_corrections, Some(1));
    assert_eq!(rows[1].status, "error");
    assert!(rows[1].message.is_some());
    let summary = csv::Reader::from_path(out.path().join("summary.csv")).unwrap();
    assert_eq!(summary.into_records().count(), 2);
}

#[test]
fn batch_on_empty_directory() {
    let input = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let rows = batch_run(input.path(), 1, &opts(out.path())).unwrap();
    assert!(rows.is_empty());
    assert!(out.path().join("summary.csv").exists());
}

#[test]
fn missing_directory_is_an_error() {
    let err = batch_run(
        Path::new("/nonexistent/scenarios"),
        1,
        &RunOptions::default(),
    );
    assert!(matches!(err, Err(HarnessError::Io(_))));
}

#[test]
fn cli_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_mcfc");
    let dir = tempfile::tempdir().unwrap();
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/toy.toml");

    let ok = Command::new(bin).arg("run").arg(&toy).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));

    let mut spec = fixture("toy");
    spec.metric.target_db = -100.0;
    let hard = dir.path().join("hard.toml");
    fs::write(&hard, spec.to_toml()).unwrap();
    let infeasible = Command::new(bin).arg("run").arg(&hard).output().unwrap();
    assert_eq!(infeasible.status.code(), Some(2));

    let missing = Command::new(bin)
        .args(["run", "/nonexistent.toml"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));

    let scale = Command::new(bin)
        .args([
            "scale", "--faults", "5,45", "--base-n", "50", "--factor", "2", "--count", "2",
        ])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&scale.stdout).trim(), "9,10,90,91");
}
