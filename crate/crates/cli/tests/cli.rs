//! End-to-end tests of the `wildarc` binary: exit codes, artifact shapes,
//! config resolution, and byte-level determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use tempfile::TempDir;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_wildarc")
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_in(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().expect("no signal"),
        stdout: String::from_utf8(out.stdout).expect("utf-8 stdout"),
        stderr: String::from_utf8(out.stderr).expect("utf-8 stderr"),
    }
}

fn run(args: &[&str]) -> (Run, TempDir) {
    let tmp = TempDir::new().expect("tempdir");
    let run = run_in(tmp.path(), args);
    (run, tmp)
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).expect("artifact exists");
    serde_json::from_str(&text).expect("artifact is JSON")
}

/// Data rows of a CSV artifact: everything after the `#` preamble and the
/// header line.
fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).expect("artifact exists");
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .expect("dir exists")
        .map(|e| e.expect("entry").path())
        .collect();
    out.sort();
    out
}

// ---------------------------------------------------------------------------
// build-arc / verify-arc
// ---------------------------------------------------------------------------

#[test]
fn build_arc_passes_and_counts_unit_crossings() {
    let (r, tmp) = run(&["build-arc", "--out", "out"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert!(r.stdout.contains("PASS"));
    let report = read_json(&tmp.path().join("out/conditions.json"));
    assert_eq!(report["report"]["ok"], true);
    let cert = &report["report"]["certificate"];
    assert_eq!(cert["disk"]["crossings_a"], 1);
    assert_eq!(cert["disk"]["crossings_c"], 1);
    assert_eq!(report["artifact_version"], 1);
    assert_eq!(report["config"]["command"], "build-arc");
}

#[test]
fn build_arc_level_zero_writes_the_bare_generator() {
    let (r, tmp) = run(&["build-arc", "--out", "out", "--levels", "0"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    // One generator chain at the default density: 4 segments of 64
    // samples each, sharing endpoints, plus the final junction vertex.
    let rows = data_rows(&tmp.path().join("out/arc.csv"));
    assert_eq!(rows.len(), 4 * 64 + 1);
}

#[test]
fn chord_control_fails_the_crossing_condition() {
    let (r, tmp) = run(&["build-arc", "--out", "out", "--negative-control", "chord"]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    let report = read_json(&tmp.path().join("out/conditions.json"));
    assert_eq!(report["report"]["ok"], false);
    let disk = &report["report"]["certificate"]["disk"];
    assert_eq!(disk["ok"], false);
    assert_ne!(disk["crossings_a"], 1);
}

#[test]
fn flat_control_fails_the_embedding_condition() {
    let (r, tmp) = run(&["build-arc", "--out", "out", "--negative-control", "flat"]);
    assert_eq!(r.code, 2, "stderr: {}", r.stderr);
    let cert = &read_json(&tmp.path().join("out/conditions.json"))["report"]["certificate"];
    assert_eq!(cert["embedding"]["ok"], false);
}

#[test]
fn verify_arc_reports_stable_counts() {
    let (r, tmp) = run(&["verify-arc", "--out", "out"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let report = read_json(&tmp.path().join("out/verify.json"));
    assert_eq!(report["report"]["counts_stable"], true);
    assert_eq!(report["report"]["densities"].as_array().unwrap().len(), 3);
}

// ---------------------------------------------------------------------------
// flow-field / fixed-points / orbit / separatrix
// ---------------------------------------------------------------------------

#[test]
fn flow_field_far_field_is_the_unit_translation() {
    // grid 5, extent 2.5 puts a sample at exactly (2.5, 0, 0), outside
    // the perturbed ball, where the field is e1 exactly.
    let (r, tmp) = run(&["flow-field", "--out", "out", "--grid", "5"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let rows = data_rows(&tmp.path().join("out/flow_field.csv"));
    let parse = |s: &str| s.parse::<f64>().unwrap();
    let row = rows
        .iter()
        .find(|row| parse(&row[0]) == 2.5 && parse(&row[1]) == 0.0 && parse(&row[2]) == 0.0)
        .expect("grid contains (2.5, 0, 0)");
    assert_eq!(parse(&row[3]), 1.0);
    assert_eq!(parse(&row[4]), 0.0);
    assert_eq!(parse(&row[5]), 0.0);
    // Corner points lie outside the solid cylinder and are skipped.
    assert!(rows.len() < 125);
}

#[test]
fn fixed_points_classifies_sink_and_saddle() {
    let (r, tmp) = run(&["fixed-points", "--out", "out"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let report = read_json(&tmp.path().join("out/fixed_points.json"));
    let eq = report["report"]["equilibria"].as_array().unwrap();
    assert_eq!(eq.len(), 2);
    let by_label = |l: &str| eq.iter().find(|e| e["label"] == l).unwrap();
    assert_eq!(by_label("Q")["kind"], "SINK");
    assert_eq!(by_label("P")["kind"], "SADDLE(u=1)");
}

#[test]
fn orbit_with_explicit_start_has_one_row_per_step() {
    let (r, tmp) = run(&[
        "orbit", "--out", "out", "--x0", "1.5,0.2,0", "--duration", "2",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let rows = data_rows(&tmp.path().join("out/orbit.csv"));
    assert_eq!(rows.len(), 201); // t = 0 plus 200 steps of the default dt
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), 1.5);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.2);
}

#[test]
fn orbit_in_four_dimensions_accepts_a_four_coordinate_start() {
    let (r, tmp) = run(&[
        "orbit", "--out", "out", "--dim", "4", "--x0", "0,0.3,0.1,0.2", "--duration", "1",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let rows = data_rows(&tmp.path().join("out/orbit.csv"));
    assert_eq!(rows[0].len(), 5); // t plus four coordinates
    assert_eq!(rows.len(), 101);
}

#[test]
fn separatrix_minus_side_lands_on_the_sink() {
    let (r, tmp) = run(&["separatrix", "--out", "out", "--side", "minus"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let rows = data_rows(&tmp.path().join("out/separatrix.csv"));
    let last = rows.last().unwrap();
    let x1 = last[0].parse::<f64>().unwrap();
    let x2 = last[1].parse::<f64>().unwrap();
    assert!((x1 + 1.0).abs() < 1e-6 && x2.abs() < 1e-12, "ended at {last:?}");
}

// ---------------------------------------------------------------------------
// pixton / surgery
// ---------------------------------------------------------------------------

#[test]
fn pixton_census_counts_match() {
    let (r, tmp) = run(&["pixton", "--out", "out", "--basin-samples", "40"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let census = read_json(&tmp.path().join("out/pixton_census.json"));
    assert_eq!(census["report"]["counts"]["SINK"], 2);
    assert_eq!(census["report"]["counts"]["SADDLE"], 1);
    assert_eq!(census["report"]["counts"]["SOURCE"], 1);
    let basin = read_json(&tmp.path().join("out/basin.json"));
    assert_eq!(basin["report"]["counts"]["unresolved"], 0);
}

#[test]
fn surgery_gates_pass_and_witness_table_is_complete() {
    let (r, tmp) = run(&[
        "surgery", "--out", "out", "--witnesses", "6", "--controls", "6",
        "--equi-samples", "200",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let census = read_json(&tmp.path().join("out/surgery_census.json"));
    assert_eq!(census["report"]["counts"]["SINK"], 3);
    assert_eq!(census["report"]["counts"]["SADDLE"], 2);
    assert_eq!(census["report"]["counts"]["SOURCE"], 1);
    let rows = data_rows(&tmp.path().join("out/witnesses.csv"));
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().take(6).all(|row| row[1] == "witness" && row[10] == "true"));
    assert!(rows.iter().skip(6).all(|row| row[1] == "control" && row[10] == "false"));
    let residuals = read_json(&tmp.path().join("out/residuals.json"));
    assert_eq!(residuals["report"]["ok"], true);
}

#[test]
fn cylinder_surgery_census_is_two_two_two() {
    let (r, tmp) = run(&[
        "surgery", "--out", "out", "--variant", "cylinder", "--levels", "2",
        "--around", "3", "--equi-samples", "100",
    ]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let census = read_json(&tmp.path().join("out/surgery_census.json"));
    assert_eq!(census["report"]["counts"]["SINK"], 2);
    assert_eq!(census["report"]["counts"]["SADDLE"], 2);
    assert_eq!(census["report"]["counts"]["SOURCE"], 2);
}

// ---------------------------------------------------------------------------
// export
// ---------------------------------------------------------------------------

#[test]
fn export_writes_only_the_requested_artifacts() {
    let (r, tmp) = run(&["export", "--out", "out", "--what", "arc,knot", "--levels", "1"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let out = tmp.path().join("out");
    assert!(out.join("arc.csv").exists());
    assert!(out.join("knot.csv").exists());
    assert!(!out.join("delta.obj").exists());
    assert!(!out.join("tube.obj").exists());
    let knot = data_rows(&out.join("knot.csv"));
    // Fiber coordinates live on the circle parameterization.
    for row in &knot {
        let fiber = row[3].parse::<f64>().unwrap();
        assert!((0.0..=1.0).contains(&fiber), "fiber {fiber} out of range");
    }
}

#[test]
fn export_rejects_unknown_items() {
    let (r, _tmp) = run(&["export", "--out", "out", "--what", "arc,torus"]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("torus"));
}

#[test]
fn obj_export_uses_one_based_faces() {
    let (r, tmp) = run(&["export", "--out", "out", "--what", "delta"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    let text = fs::read_to_string(tmp.path().join("out/delta.obj")).unwrap();
    let mut vertices = 0usize;
    let mut min_index = usize::MAX;
    for line in text.lines() {
        if line.starts_with("v ") {
            vertices += 1;
        } else if let Some(rest) = line.strip_prefix("f ") {
            for tok in rest.split_whitespace() {
                min_index = min_index.min(tok.parse::<usize>().unwrap());
            }
        }
    }
    assert!(vertices > 0 && min_index == 1);
}

// ---------------------------------------------------------------------------
// Config file resolution and exit codes
// ---------------------------------------------------------------------------

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("run.json"),
        r#"{"orbit": {"duration": 1.0, "x0": "1.5,0.2,0"}}"#,
    )
    .unwrap();
    let r = run_in(tmp.path(), &["orbit", "--config", "run.json", "--out", "a"]);
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(data_rows(&tmp.path().join("a/orbit.csv")).len(), 101);
    // The CLI flag wins over the file value.
    let r = run_in(
        tmp.path(),
        &["orbit", "--config", "run.json", "--out", "b", "--duration", "2"],
    );
    assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    assert_eq!(data_rows(&tmp.path().join("b/orbit.csv")).len(), 201);
}

#[test]
fn unknown_config_key_exits_four() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.json"), r#"{"orbit": {"durration": 1.0}}"#).unwrap();
    let r = run_in(tmp.path(), &["orbit", "--config", "run.json", "--out", "o"]);
    assert_eq!(r.code, 4);
    assert!(r.stderr.contains("durration"));
}

#[test]
fn malformed_config_exits_four_and_missing_config_exits_three() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.json"), "{not json").unwrap();
    let r = run_in(tmp.path(), &["orbit", "--config", "run.json", "--out", "o"]);
    assert_eq!(r.code, 4);
    let r = run_in(tmp.path(), &["orbit", "--config", "absent.json", "--out", "o"]);
    assert_eq!(r.code, 3);
}

#[test]
fn usage_errors_exit_four_and_help_exits_zero() {
    let (r, _tmp) = run(&["orbit", "--no-such-flag"]);
    assert_eq!(r.code, 4);
    let (r, _tmp) = run(&["--help"]);
    assert_eq!(r.code, 0);
    assert!(r.stdout.contains("build-arc"));
    let (r, _tmp) = run(&["build-arc", "--samples", "not-a-number"]);
    assert_eq!(r.code, 4);
    let (r, _tmp) = run(&["build-arc", "--theta0", "0"]);
    assert_eq!(r.code, 4);
}

#[test]
fn seeded_reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    for out in ["a", "b"] {
        let r = run_in(
            tmp.path(),
            &[
                "pixton", "--out", out, "--seed", "11", "--orbit",
                "--basin-samples", "40",
            ],
        );
        assert_eq!(r.code, 0, "stderr: {}", r.stderr);
    }
    let a = files_under(&tmp.path().join("a"));
    let b = files_under(&tmp.path().join("b"));
    assert_eq!(a.len(), b.len());
    assert!(!a.is_empty());
    for (fa, fb) in a.iter().zip(&b) {
        assert_eq!(fa.file_name(), fb.file_name());
        assert_eq!(
            fs::read(fa).unwrap(),
            fs::read(fb).unwrap(),
            "artifact {:?} differs between reruns",
            fa.file_name()
        );
    }
}
