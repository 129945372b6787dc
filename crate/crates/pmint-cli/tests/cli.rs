//! End-to-end tests of the command-line surface and its exit codes.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_pmint");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_region_hierarchy(dir: &Path) -> String {
    let path = dir.join("hier.json");
    fs::write(
        &path,
        r#"{
            "bottom": ["R11", "R12", "R21", "R22"],
            "aggregates": [
                {"name": "Total", "children": ["R1", "R2"]},
                {"name": "R1", "children": ["R11", "R12"]},
                {"name": "R2", "children": ["R21", "R22"]}
            ]
        }"#,
    )
    .unwrap();
    path.display().to_string()
}

fn write_forecasts(dir: &Path, series: &[&str], horizon: usize) -> String {
    let path = dir.join("fc.csv");
    let mut text = String::from("series,h,mean\n");
    for (i, name) in series.iter().enumerate() {
        for h in 1..=horizon {
            text.push_str(&format!("{name},{h},{}\n", (i + h) as f64 * 0.5));
        }
    }
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn write_residuals(dir: &Path, rows: &[&str]) -> String {
    let path = dir.join("res.csv");
    let mut text = String::from("Total,R1,R2,R11,R12,R21,R22\n");
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const ALL_SERIES: [&str; 7] = ["Total", "R1", "R2", "R11", "R12", "R21", "R22"];

#[test]
fn help_and_version_succeed() {
    assert!(run(&["--help"]).status.success());
    assert!(run(&["--version"]).status.success());
}

#[test]
fn full_pipeline_round_trips() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let sim = root.join("sim");
    let out = run(&[
        "simulate",
        "--T",
        "80",
        "--seed",
        "9",
        "--replicates",
        "2",
        "--out-dir",
        sim.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(sim.join("panel_0000.csv").exists());
    assert!(sim.join("panel_0001.csv").exists());
    assert!(sim.join("manifest.json").exists());

    let hier = root.join("hier.json");
    fs::write(
        &hier,
        r#"{
            "bottom": ["AA", "AB", "BA", "BB"],
            "aggregates": [
                {"name": "Total", "children": ["A", "B"]},
                {"name": "A", "children": ["AA", "AB"]},
                {"name": "B", "children": ["BA", "BB"]}
            ]
        }"#,
    )
    .unwrap();

    let fc = root.join("fc.csv");
    let res = root.join("res.csv");
    let out = run(&[
        "forecast",
        "--input",
        sim.join("panel_0000.csv").to_str().unwrap(),
        "--hierarchy",
        hier.to_str().unwrap(),
        "--order",
        "1",
        "--horizon",
        "4",
        "--out-forecasts",
        fc.to_str().unwrap(),
        "--out-residuals",
        res.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let rec = root.join("rec");
    let out = run(&[
        "reconcile",
        "--hierarchy",
        hier.to_str().unwrap(),
        "--forecasts",
        fc.to_str().unwrap(),
        "--residuals",
        res.to_str().unwrap(),
        "--method",
        "pmint",
        "--kh",
        "h",
        "--horizon",
        "4",
        "--out-dir",
        rec.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for h in 1..=4 {
        assert!(rec.join(format!("reconciled_pmint_h{h}.json")).exists());
    }

    // Use the trailing panel rows as stand-in actuals.
    let panel_text = fs::read_to_string(sim.join("panel_0000.csv")).unwrap();
    let lines: Vec<&str> = panel_text.lines().collect();
    let mut actuals = String::from(lines[0]);
    actuals.push('\n');
    for line in &lines[lines.len() - 4..] {
        actuals.push_str(line);
        actuals.push('\n');
    }
    let actuals_path = root.join("actuals.csv");
    fs::write(&actuals_path, actuals).unwrap();

    let scores = root.join("scores.csv");
    let score_args: Vec<String> = vec![
        "score".into(),
        "--reconciled".into(),
        rec.join("reconciled_pmint_h1.json").display().to_string(),
        rec.join("reconciled_pmint_h2.json").display().to_string(),
        "--actuals".into(),
        actuals_path.display().to_string(),
        "--samples".into(),
        "300".into(),
        "--seed".into(),
        "4".into(),
        "--out".into(),
        scores.display().to_string(),
    ];
    let out = Command::new(BIN).args(&score_args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = fs::read(&scores).unwrap();

    // Same command, same seed: byte-identical output.
    let out = Command::new(BIN).args(&score_args).output().unwrap();
    assert!(out.status.success());
    let second = fs::read(&scores).unwrap();
    assert_eq!(first, second);

    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("method,h,replicate,energy_score,seed"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn missing_series_in_forecasts_exits_2_naming_it() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let hier = write_region_hierarchy(root);
    // R2 missing from the forecasts.
    let series = ["Total", "R1", "R11", "R12", "R21", "R22"];
    let fc = write_forecasts(root, &series, 2);
    let res = write_residuals(
        root,
        &[
            "0.1,0.2,-0.1,0.3,0.0,0.1,-0.2",
            "-0.2,0.1,0.2,-0.3,0.1,0.0,0.2",
            "0.3,-0.1,0.1,0.2,-0.2,0.1,0.0",
        ],
    );
    let out = run(&[
        "reconcile",
        "--hierarchy",
        &hier,
        "--forecasts",
        &fc,
        "--residuals",
        &res,
        "--out-dir",
        root.join("rec").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("R2"), "stderr: {stderr}");
}

#[test]
fn single_residual_row_exits_2() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let hier = write_region_hierarchy(root);
    let fc = write_forecasts(root, &ALL_SERIES, 2);
    let res = write_residuals(root, &["0.1,0.2,-0.1,0.3,0.0,0.1,-0.2"]);
    let out = run(&[
        "reconcile",
        "--hierarchy",
        &hier,
        "--forecasts",
        &fc,
        "--residuals",
        &res,
        "--out-dir",
        root.join("rec").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("at least 2"), "stderr: {stderr}");
}

#[test]
fn degenerate_covariance_exits_3() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let hier = write_region_hierarchy(root);
    let fc = write_forecasts(root, &ALL_SERIES, 2);
    // All-zero residuals: the covariance cannot be made positive definite.
    let zeros = "0,0,0,0,0,0,0";
    let res = write_residuals(root, &[zeros, zeros, zeros]);
    let out = run(&[
        "reconcile",
        "--hierarchy",
        &hier,
        "--forecasts",
        &fc,
        "--residuals",
        &res,
        "--out-dir",
        root.join("rec").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("not positive definite"), "stderr: {stderr}");
}

#[test]
fn non_numeric_cell_exits_2() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let hier = write_region_hierarchy(root);
    let fc = root.join("fc.csv");
    fs::write(&fc, "series,h,mean\nTotal,1,abc\n").unwrap();
    let res = write_residuals(
        root,
        &["0.1,0.2,-0.1,0.3,0.0,0.1,-0.2", "-0.2,0.1,0.2,-0.3,0.1,0.0,0.2"],
    );
    let out = run(&[
        "reconcile",
        "--hierarchy",
        &hier,
        "--forecasts",
        fc.to_str().unwrap(),
        "--residuals",
        &res,
        "--out-dir",
        root.join("rec").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn actuals_dimension_mismatch_exits_2() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let hier = write_region_hierarchy(root);
    let fc = write_forecasts(root, &ALL_SERIES, 2);
    let res = write_residuals(
        root,
        &[
            "0.1,0.2,-0.1,0.3,0.0,0.1,-0.2",
            "-0.2,0.1,0.2,-0.3,0.1,0.0,0.2",
            "0.3,-0.1,0.1,0.2,-0.2,0.1,0.0",
        ],
    );
    let rec = root.join("rec");
    let out = run(&[
        "reconcile",
        "--hierarchy",
        &hier,
        "--forecasts",
        &fc,
        "--residuals",
        &res,
        "--method",
        "lg",
        "--out-dir",
        rec.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    // Actuals with the wrong number of columns.
    let actuals = root.join("actuals.csv");
    fs::write(&actuals, "Total,R1\n1.0,2.0\n").unwrap();
    let out = run(&[
        "score",
        "--reconciled",
        rec.join("reconciled_lg_h1.json").to_str().unwrap(),
        "--actuals",
        actuals.to_str().unwrap(),
        "--out",
        root.join("scores.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn experiment_writes_deterministic_outputs() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let args = |out: &Path| -> Vec<String> {
        vec![
            "experiment".into(),
            "--replicates".into(),
            "2".into(),
            "--T".into(),
            "60".into(),
            "--samples".into(),
            "200".into(),
            "--seed".into(),
            "21".into(),
            "--out-dir".into(),
            out.display().to_string(),
        ]
    };
    let out_a = root.join("a");
    let out_b = root.join("b");
    assert!(Command::new(BIN).args(args(&out_a)).output().unwrap().status.success());
    assert!(Command::new(BIN).args(args(&out_b)).output().unwrap().status.success());
    let scores_a = fs::read(out_a.join("scores.csv")).unwrap();
    let scores_b = fs::read(out_b.join("scores.csv")).unwrap();
    assert_eq!(scores_a, scores_b);
    let summary_a = fs::read(out_a.join("summary.csv")).unwrap();
    let summary_b = fs::read(out_b.join("summary.csv")).unwrap();
    assert_eq!(summary_a, summary_b);
    let text = String::from_utf8(summary_a).unwrap();
    assert!(text.starts_with("method,mean_energy_score"));
    assert_eq!(text.lines().count(), 4);
}
