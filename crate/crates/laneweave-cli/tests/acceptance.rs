//! Acceptance gate, CLI leg: the generate → calibrate → validate round trip
//! must close through files alone, with no in-process handoff.

use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

const BIN: &str = env!("CARGO_BIN_EXE_laneweave");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary spawns")
}

fn path_str(path: &Path) -> &str {
    path.to_str().expect("temp paths are UTF-8")
}

#[test]
fn criterion_10_file_round_trip_reproduces_calibration_quality() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("observations.csv");
    let fitted = dir.path().join("fitted.ini");

    let generate = run(&[
        "generate",
        "--preset",
        "calibration-415",
        "--sigma",
        "0",
        "--out",
        path_str(&data),
    ]);
    assert_eq!(
        generate.status.code(),
        Some(0),
        "generate stderr: {}",
        String::from_utf8_lossy(&generate.stderr)
    );

    let calibrate = run(&["calibrate", "--data", path_str(&data), "--out", path_str(&fitted)]);
    assert_eq!(
        calibrate.status.code(),
        Some(0),
        "calibrate stderr: {}",
        String::from_utf8_lossy(&calibrate.stderr)
    );

    let validate = run(&[
        "validate",
        "--data",
        path_str(&data),
        "--coefficients",
        path_str(&fitted),
        "--json",
    ]);
    assert_eq!(
        validate.status.code(),
        Some(0),
        "validate stderr: {}",
        String::from_utf8_lossy(&validate.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&validate.stdout))
            .expect("validate --json emits a JSON document");
    let mper = report["mper"].as_f64().expect("report carries the headline error");
    let points = report["n_points"].as_i64().unwrap_or(0);
    let elapsed = start.elapsed().as_secs_f64();

    let pass = points == 415 && mper <= 0.5;
    println!(
        "[acceptance] criterion 10 (file-only generate → calibrate → validate round trip): \
         {} — {points} points, MPER {mper:.4}% (bound 0.5%), {elapsed:.1} s",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "round-trip MPER {mper} over {points} points");
}
