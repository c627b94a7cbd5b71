//! Single runs, multi-seed benches, aggregation and rate reports.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rlsa_core::metrics::{infeasibility, rate_fit_points};
use rlsa_core::solver::{CouplingReport, COUPLING_INTERPRETATION};
use rlsa_core::{linalg, GapMethod, ProblemInstance, RateFit, RunResult, TraceRecord};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, HarnessResult};
use crate::output::{self, TraceWriter};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub interpretation: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub c_f: f64,
    pub passed: bool,
}

impl From<&CouplingReport> for CouplingSummary {
    fn from(r: &CouplingReport) -> Self {
        Self {
            interpretation: COUPLING_INTERPRETATION.to_string(),
            lhs: r.lhs,
            rhs: r.rhs,
            margin: r.margin,
            c_f: r.c_f,
            passed: r.passed,
        }
    }
}

/// Final state of one run, as written to `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub xbar: Vec<f64>,
    pub infeas: f64,
    pub gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_method: Option<GapMethod>,
    pub lambda_norm: f64,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingSummary>,
}

pub fn summarize(instance: &ProblemInstance, result: &RunResult) -> Summary {
    let last = result.trace.last();
    Summary {
        infeas: infeasibility(&result.xbar, instance),
        gap: last.and_then(|r| r.gap_xbar),
        gap_method: last.and_then(|r| r.gap_method),
        lambda_norm: linalg::norm(&result.state.lambda),
        wall_ms: result.wall_time.as_secs_f64() * 1e3,
        coupling: result.coupling.as_ref().map(CouplingSummary::from),
        xbar: result.xbar.clone(),
    }
}

/// Runs one seed, streaming its trace to `dir/trace.csv` and writing
/// `dir/summary.json`.
pub fn run_seed(
    instance: &ProblemInstance,
    config: &ExperimentConfig,
    seed: u64,
    dir: &Path,
) -> HarnessResult<(RunResult, Summary)> {
    output::ensure_dir(dir)?;
    let mut writer = TraceWriter::create(&dir.join(output::TRACE_FILE))?;
    let mut sink_error = None;
    let result = rlsa_core::run_with_sink(instance, &config.solver_config(seed), &mut |r| {
        if sink_error.is_none() {
            if let Err(e) = writer.write(r) {
                sink_error = Some(e);
            }
        }
    })?;
    if let Some(e) = sink_error {
        return Err(e);
    }
    writer.finish()?;
    let summary = summarize(instance, &result);
    output::write_json(&dir.join(output::SUMMARY_FILE), &summary)?;
    Ok((result, summary))
}

fn write_echoes(config: &ExperimentConfig, dir: &Path) -> HarnessResult<()> {
    output::write_json(&dir.join(output::DESCRIPTOR_FILE), &config.descriptor()?)?;
    output::write_json(&dir.join(output::CONFIG_FILE), config)
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub dir: PathBuf,
    pub summary: Summary,
    pub result: RunResult,
}

/// One run on the first configured seed.
pub fn solve(config: &ExperimentConfig) -> HarnessResult<SolveOutcome> {
    let descriptor = config.descriptor()?;
    let seed = config.seeds[0];
    let dir = config.output_dir(&format!("{}-seed{seed}", descriptor.label()));
    let instance = descriptor.build()?;
    output::ensure_dir(&dir)?;
    write_echoes(config, &dir)?;
    let (result, summary) = run_seed(&instance, config, seed, &dir)?;
    Ok(SolveOutcome { dir, summary, result })
}

/// Mean and standard error across seeds at one checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub k: u64,
    pub seeds: usize,
    pub infeas_mean: f64,
    pub infeas_stderr: f64,
    pub gap_mean: Option<f64>,
    pub gap_stderr: Option<f64>,
    pub lambda_norm_mean: f64,
    pub lambda_norm_stderr: f64,
}

/// Sample mean and `sd / sqrt(m)` with the `m - 1` denominator.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Pointwise aggregate of per-seed traces, which must share checkpoints.
pub fn aggregate(traces: &[Vec<TraceRecord>]) -> HarnessResult<Vec<AggregateRow>> {
    let first = traces
        .first()
        .ok_or_else(|| HarnessError::Config("nothing to aggregate".into()))?;
    if traces
        .iter()
        .any(|t| t.len() != first.len() || t.iter().zip(first).any(|(a, b)| a.k != b.k))
    {
        return Err(HarnessError::Config("traces have different checkpoints".into()));
    }
    let column = |i: usize, f: &dyn Fn(&TraceRecord) -> Option<f64>| -> Option<Vec<f64>> {
        traces.iter().map(|t| f(&t[i])).collect()
    };
    Ok((0..first.len())
        .map(|i| {
            let (infeas_mean, infeas_stderr) = mean_stderr(&column(i, &|r| Some(r.infeas_xbar)).unwrap());
            let (lambda_norm_mean, lambda_norm_stderr) = mean_stderr(&column(i, &|r| Some(r.lambda_norm)).unwrap());
            let gap = column(i, &|r| r.gap_xbar).map(|v| mean_stderr(&v));
            AggregateRow {
                k: first[i].k,
                seeds: traces.len(),
                infeas_mean,
                infeas_stderr,
                gap_mean: gap.map(|g| g.0),
                gap_stderr: gap.map(|g| g.1),
                lambda_norm_mean,
                lambda_norm_stderr,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitOutcome {
    Fit(RateFit),
    Failed { error: String },
}

impl FitOutcome {
    pub fn slope(&self) -> Option<f64> {
        match self {
            FitOutcome::Fit(f) => Some(f.slope),
            FitOutcome::Failed { .. } => None,
        }
    }
}

/// Log-log slopes of the seed-averaged metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub k_min: u64,
    pub seeds: usize,
    pub gap: FitOutcome,
    pub infeasibility: FitOutcome,
}

pub fn rate_report(rows: &[AggregateRow], k_min: u64) -> RateReport {
    let fit = |points: Option<Vec<(u64, f64)>>| match points {
        None => FitOutcome::Failed {
            error: "metric not recorded".into(),
        },
        Some(p) => match rate_fit_points(&p, k_min) {
            Ok(f) => FitOutcome::Fit(f),
            Err(e) => FitOutcome::Failed { error: e.to_string() },
        },
    };
    RateReport {
        k_min,
        seeds: rows.first().map_or(0, |r| r.seeds),
        gap: fit(rows.iter().map(|r| r.gap_mean.map(|g| (r.k, g))).collect()),
        infeasibility: fit(Some(rows.iter().map(|r| (r.k, r.infeas_mean)).collect())),
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub dir: PathBuf,
    pub runs: Vec<(u64, RunResult)>,
    pub aggregate: Vec<AggregateRow>,
    pub report: RateReport,
}

pub fn seed_dir(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("seed-{seed}"))
}

/// All seeds in parallel, then a sequential aggregation.
pub fn bench(config: &ExperimentConfig) -> HarnessResult<BenchOutcome> {
    if config.seeds.len() < 2 {
        return Err(HarnessError::Config("bench needs at least 2 seeds".into()));
    }
    let descriptor = config.descriptor()?;
    let dir = config.output_dir(&format!("{}-bench", descriptor.label()));
    let instance = descriptor.build()?;
    output::ensure_dir(&dir)?;
    write_echoes(config, &dir)?;
    let runs = config
        .seeds
        .par_iter()
        .map(|&s| run_seed(&instance, config, s, &seed_dir(&dir, s)).map(|(r, _)| (s, r)))
        .collect::<HarnessResult<Vec<_>>>()?;
    let traces: Vec<Vec<TraceRecord>> = runs.iter().map(|(_, r)| r.trace.clone()).collect();
    let aggregate = aggregate(&traces)?;
    output::write_rows(&dir.join(output::AGGREGATE_FILE), &aggregate)?;
    let report = rate_report(&aggregate, config.metrics.rate_k_min);
    output::write_json(&dir.join(output::RATE_REPORT_FILE), &report)?;
    Ok(BenchOutcome {
        dir,
        runs,
        aggregate,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: u64, infeas: f64, gap: Option<f64>) -> TraceRecord {
        TraceRecord {
            k,
            rho_k: 1.0,
            gamma_k: 1.0,
            t_k: 1.0,
            infeas_xbar: infeas,
            gap_xbar: gap,
            gap_method: None,
            lambda_norm: 0.0,
            wall_ms: 0.0,
            xbar_feasible: false,
        }
    }

    #[test]
    fn mean_stderr_values() {
        assert_eq!(mean_stderr(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_stderr(&[2.5, 2.5, 2.5]).1, 0.0);
        assert_eq!(mean_stderr(&[4.0]), (4.0, 0.0));
    }

    #[test]
    fn aggregate_requires_matching_checkpoints() {
        let a = vec![rec(0, 1.0, None), rec(1, 0.5, None)];
        let b = vec![rec(0, 1.0, None), rec(2, 0.5, None)];
        assert!(aggregate(&[a.clone(), b]).is_err());
        let rows = aggregate(&[a.clone(), a]).unwrap();
        assert_eq!(rows[1].infeas_mean, 0.5);
        assert_eq!(rows[1].infeas_stderr, 0.0);
        assert_eq!(rows[1].gap_mean, None);
    }

    #[test]
    fn rate_report_reports_fit_errors() {
        let rows: Vec<AggregateRow> = aggregate(&[(0..12)
            .map(|i| {
                let k = 1u64 << i;
                rec(k, (k as f64).powf(-0.5), Some(-1.0))
            })
            .collect()])
        .unwrap();
        let report = rate_report(&rows, 1);
        assert!((report.infeasibility.slope().unwrap() + 0.5).abs() < 1e-12);
        assert!(matches!(report.gap, FitOutcome::Failed { .. }));
    }
}
