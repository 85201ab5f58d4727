//! End-to-end checks of the command-line driver: flag surface, exit codes,
//! output formats, and byte-level determinism.

use std::path::PathBuf;
use std::process::{Command, Output};

fn riccibound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riccibound"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn stdout_str(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).expect("stdout should be UTF-8")
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process should exit normally")
}

fn temp_path(name: &str) -> PathBuf {
    let mut path = std::env::temp_dir();
    path.push(format!("riccibound-cli-test-{}-{name}", std::process::id()));
    path
}

#[test]
fn passing_run_exits_zero_with_json_on_stdout() {
    let out = riccibound(&["--scenario", "warped-s3", "--samples", "3", "--seed", "11"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_str(&out);
    let parsed: serde_json::Value = serde_json::from_str(&text).expect("stdout should be JSON");
    assert_eq!(parsed.as_object().unwrap().len(), 4);
    let offsets: Vec<usize> = ["\"config\":", "\"identity_audits\":", "\"verdicts\":", "\"summary\":"]
        .iter()
        .map(|key| text.find(key).unwrap_or_else(|| panic!("missing top-level {key}")))
        .collect();
    assert!(offsets.windows(2).all(|w| w[0] < w[1]), "top-level key order: {offsets:?}");
    assert_eq!(parsed["summary"]["selected_convention"], "oneill");
    assert_eq!(parsed["summary"]["exit_code"], 0);
    assert_eq!(parsed["config"]["samples"], 3);
    assert_eq!(parsed["verdicts"].as_array().unwrap().len(), 12);
}

#[test]
fn identical_configs_produce_byte_identical_reports() {
    let args = [
        "--scenario",
        "warped-h3",
        "--samples",
        "4",
        "--seed",
        "99",
        "--theorems",
        "t31,t53,hineva-fuzz",
    ];
    let a = riccibound(&args);
    let b = riccibound(&args);
    assert_eq!(exit_code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());

    let mut reseeded: Vec<&str> = args.to_vec();
    reseeded[5] = "100";
    let c = riccibound(&reseeded);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn csv_format_emits_the_pinned_verdict_table() {
    let out = riccibound(&[
        "--scenario",
        "clifford-torus-map",
        "--samples",
        "2",
        "--format",
        "csv",
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "point_index,theorem,lhs,rhs,slack,equality,convention");
    let rows: Vec<&str> = lines.collect();
    // 2 points × (t62 + t65).
    assert_eq!(rows.len(), 4);
    for row in rows {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 7, "bad row: {row}");
        assert_eq!(*fields.last().unwrap(), "modern");
        assert_eq!(fields[5], "true");
    }
}

#[test]
fn out_flag_writes_the_report_to_a_file() {
    let path = temp_path("report.json");
    let _ = std::fs::remove_file(&path);
    let out = riccibound(&[
        "--scenario",
        "flat-projection",
        "--samples",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0);
    assert!(out.stdout.is_empty(), "report should go to the file, not stdout");
    let written = std::fs::read_to_string(&path).expect("output file should exist");
    let parsed: serde_json::Value = serde_json::from_str(&written).expect("file should be JSON");
    assert_eq!(parsed["summary"]["violation_count"], 0);
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn scenario_files_load_through_the_same_flag() {
    let source = riccibound(&["--scenario", "warped-s3", "--samples", "2", "--format", "csv"]);
    let text = riccibound_core::scenario::to_text(
        &riccibound_core::scenario::builtin("warped-s3").unwrap(),
    );
    let path = temp_path("warped-s3.scenario");
    std::fs::write(&path, text).unwrap();
    let reloaded =
        riccibound(&["--scenario", path.to_str().unwrap(), "--samples", "2", "--format", "csv"]);
    assert_eq!(exit_code(&reloaded), 0);
    // Same geometry, same sampler: the verdict tables agree byte for byte.
    assert_eq!(stdout_str(&source), stdout_str(&reloaded));
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn configuration_errors_exit_three() {
    // Unknown scenario.
    let out = riccibound(&["--scenario", "no-such-geometry"]);
    assert_eq!(exit_code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-such-geometry"));

    // Theorem not applicable to the scenario.
    let out = riccibound(&["--scenario", "warped-s3", "--theorems", "t62", "--samples", "1"]);
    assert_eq!(exit_code(&out), 3);

    // Invalid sample count.
    let out = riccibound(&["--scenario", "warped-s3", "--samples", "0"]);
    assert_eq!(exit_code(&out), 3);

    // Invalid flag values route through the same code.
    let out = riccibound(&["--convention", "sideways"]);
    assert_eq!(exit_code(&out), 3);
    let out = riccibound(&["--format", "xml"]);
    assert_eq!(exit_code(&out), 3);
    let out = riccibound(&["--no-such-flag"]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn forcing_the_mismatched_convention_exits_two() {
    let out = riccibound(&[
        "--scenario",
        "warped-s3",
        "--samples",
        "2",
        "--convention",
        "modern",
    ]);
    assert_eq!(exit_code(&out), 2);
    let parsed: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(parsed["summary"]["exit_code"], 2);
}

#[test]
fn help_and_version_exit_zero() {
    let help = riccibound(&["--help"]);
    assert_eq!(exit_code(&help), 0);
    let text = stdout_str(&help);
    for flag in [
        "--scenario",
        "--theorems",
        "--samples",
        "--seed",
        "--tol-slack",
        "--tol-identity",
        "--convention",
        "--format",
        "--out",
    ] {
        assert!(text.contains(flag), "help should document {flag}");
    }
    let version = riccibound(&["--version"]);
    assert_eq!(exit_code(&version), 0);
}

#[test]
fn fuzz_only_runs_work_on_any_scenario() {
    let out = riccibound(&[
        "--scenario",
        "flat-projection",
        "--samples",
        "1",
        "--theorems",
        "hineva-fuzz",
        "--format",
        "csv",
    ]);
    assert_eq!(exit_code(&out), 0);
    let text = stdout_str(&out);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| r.contains("hineva-fuzz")));
}
