use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rlsa_cli::experiment::{aggregate, AggregateRow, Summary};
use rlsa_cli::output::{read_trace, AGGREGATE_FILE, SUMMARY_FILE, TRACE_FILE};
use rlsa_core::TraceRecord;

fn rlsa(args: &[&str], out_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlsa"))
        .args(args)
        .env("RLSA_OUT_DIR", out_root)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn solve_writes_run_directory_under_env_root() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rlsa(
        &["solve", "--family", "affine-vi", "--n", "2", "--J", "3", "--seed", "4", "--iters", "2000"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("affine-vi-n2-J3-s0-seed4");
    for f in [TRACE_FILE, SUMMARY_FILE, "config.json", "descriptor.json"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let trace = read_trace(&dir.join(TRACE_FILE)).unwrap();
    assert_eq!(trace.last().unwrap().k, 2000);
    let summary: Summary = serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary.xbar.len(), 2);
    assert_eq!(summary.infeas, trace.last().unwrap().infeas_xbar);
}

#[test]
fn explicit_out_dir_is_created() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("a/b/c");
    let o = rlsa(
        &["solve", "--family", "scalar-reference", "--iters", "100", "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join(TRACE_FILE).is_file());
}

#[test]
fn bad_step_size_in_config_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(
        &cfg,
        r#"{"instance": {"family": "scalar-reference", "seed": 0, "dims": {}, "noise_level": 0.1},
            "solver": {"rho0": -1.0}}"#,
    )
    .unwrap();
    let o = rlsa(&["solve", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rho0"), "{}", stderr(&o));
}

#[test]
fn unknown_config_field_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("typo.json");
    fs::write(
        &cfg,
        r#"{"instance": {"family": "scalar-reference", "seed": 0, "dims": {}, "noise_level": 0.1},
            "solver": {"rho": 1.0}}"#,
    )
    .unwrap();
    let o = rlsa(&["solve", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn coupling_violation_exits_with_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rlsa(
        &[
            "solve", "--family", "affine-vi", "--iters", "10", "--rho", "50", "--gamma", "50", "--check-coupling",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn validate_flags_non_monotone_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rlsa(&["validate", "--family", "scalar-reference", "--non-monotone"], tmp.path());
    assert_eq!(o.status.code(), Some(4));
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("non-monotone-n2"));
    assert!(stderr(&o).contains("monoton"), "{}", stderr(&o));
}

#[test]
fn validate_passes_on_scalar_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rlsa(&["validate", "--family", "scalar-reference"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn bench_aggregate_matches_per_seed_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rlsa(
        &[
            "bench", "--family", "affine-vi", "--n", "2", "--J", "2", "--seeds", "0..4", "--iters", "3000",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("affine-vi-n2-J2-s0-bench");
    let traces: Vec<Vec<TraceRecord>> = (0..4)
        .map(|s| read_trace(&dir.join(format!("seed-{s}")).join(TRACE_FILE)).unwrap())
        .collect();
    let expected = aggregate(&traces).unwrap();
    let written: Vec<AggregateRow> = csv::Reader::from_path(dir.join(AGGREGATE_FILE))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(written.len(), expected.len());
    for (w, e) in written.iter().zip(&expected) {
        assert_eq!(w.k, e.k);
        assert!((w.infeas_mean - e.infeas_mean).abs() <= 1e-12 * e.infeas_mean.abs().max(1.0));
        assert!((w.lambda_norm_mean - e.lambda_norm_mean).abs() <= 1e-12 * e.lambda_norm_mean.max(1.0));
    }
    assert!(dir.join("rate_report.json").is_file());
}

#[test]
fn deterministic_bench_has_zero_spread() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("det.json");
    fs::write(
        &cfg,
        r#"{"instance": {"family": "scalar-reference", "seed": 0, "dims": {}, "noise_level": 0.0},
            "solver": {"iterations": 500}, "seeds": [1, 2], "metrics": {"gap": "none"}}"#,
    )
    .unwrap();
    let o = rlsa(&["bench", "--config", cfg.to_str().unwrap()], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<AggregateRow> = csv::Reader::from_path(tmp.path().join("scalar-reference-n1-J1-s0-bench").join(AGGREGATE_FILE))
        .unwrap()
        .deserialize()
        .collect::<Result<_, _>>()
        .unwrap();
    assert!(rows.iter().all(|r| r.infeas_stderr == 0.0 && r.lambda_norm_stderr == 0.0));
}

#[test]
fn bench_needs_two_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let o = rlsa(&["bench", "--family", "scalar-reference", "--seeds", "3"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
}
