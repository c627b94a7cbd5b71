//! The RLSA iteration: one randomly drawn multiplier coordinate per step,
//! a projected stochastic primal step, decaying step sizes, and weighted
//! ergodic averaging of the primal iterates.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{
    dual_gap_affine, infeasibility, GapEstimate, SampledGapOracle, TraceRecord, DEFAULT_INNER_BUDGET,
    DEFAULT_INNER_TOL,
};
use crate::problem::{estimate_bounds, BoundEstimates, ProblemInstance, DEFAULT_SAFETY_FACTOR};

/// ChaCha stream ids; both streams may share a seed and stay independent.
const NOISE_STREAM: u64 = 0;
const INDEX_STREAM: u64 = 1;
const BOUNDS_STREAM: u64 = 2;

/// Samples used by the coupling check's constant estimate.
pub const COUPLING_SAMPLE_BUDGET: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// `c / (sqrt(k+1) ln(k+1))` for `k >= 1`, clamped at the `k = 0` value.
    Decaying,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum Checkpoints {
    /// `k = 0, 1, 2, 4, 8, ...`
    Geometric,
    /// Every `n` steps.
    Linear(u64),
    Explicit(Vec<u64>),
}

impl Checkpoints {
    /// Sorted, duplicate-free checkpoint list for a `k_max`-step run; `0` and
    /// `k_max` are always included.
    pub fn resolve(&self, k_max: u64) -> Vec<u64> {
        let mut ks = vec![0, k_max];
        match self {
            Checkpoints::Geometric => {
                let mut k = 1u64;
                while k < k_max {
                    ks.push(k);
                    k = k.saturating_mul(2);
                }
            }
            Checkpoints::Linear(every) => {
                let every = (*every).max(1);
                let mut k = every;
                while k < k_max {
                    ks.push(k);
                    k += every;
                }
            }
            Checkpoints::Explicit(list) => ks.extend(list.iter().copied().filter(|k| *k <= k_max)),
        }
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GapOptions {
    None,
    Affine { inner_tol: f64, inner_budget: usize },
    Sampled { budget: usize, seed: u64 },
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions::Affine {
            inner_tol: DEFAULT_INNER_TOL,
            inner_budget: DEFAULT_INNER_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rho0: f64,
    pub gamma0: f64,
    pub iterations: u64,
    pub schedule: Schedule,
    /// Seed of the noise stream `xi_k`.
    pub noise_seed: u64,
    /// Seed of the index stream `j_k`.
    pub index_seed: u64,
    pub check_coupling: bool,
    /// Starting point; defaults to the projection of the origin onto `X`.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub gap: GapOptions,
    /// Write elapsed milliseconds into traces. Off by default so traces are
    /// byte-reproducible.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            gamma0: 1.0,
            iterations: 10_000,
            schedule: Schedule::Decaying,
            noise_seed: 0,
            index_seed: 0,
            check_coupling: false,
            x0: None,
            checkpoints: Checkpoints::Geometric,
            gap: GapOptions::default(),
            record_wall_time: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho0 must be > 0, got {}", self.rho0)));
        }
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma0 must be > 0, got {}",
                self.gamma0
            )));
        }
        if let Checkpoints::Linear(0) = self.checkpoints {
            return Err(Error::InvalidArgument("linear checkpoint cadence must be >= 1".into()));
        }
        Ok(())
    }
}

/// Step sizes `(rho_k, gamma_k, t_k)` at iteration `k`.
pub fn step_sizes(k: u64, config: &SolverConfig) -> (f64, f64, f64) {
    let scale = match (config.schedule, k) {
        (Schedule::Constant, _) | (_, 0) => 1.0,
        (Schedule::Decaying, k) => {
            let kp1 = (k + 1) as f64;
            (1.0 / (kp1.sqrt() * kp1.ln())).min(1.0)
        }
    };
    (config.rho0 * scale, config.gamma0 * scale, scale)
}

/// The algebraic rearrangement `(rho gamma)^2 <= J / (120 C_f^2)` of the
/// coupling condition between the primal and dual step parameters.
pub const COUPLING_INTERPRETATION: &str = "(rho*gamma)^2 <= J/(120*C_f^2)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative on success.
    pub margin: f64,
    pub c_f: f64,
    pub passed: bool,
}

pub fn check_coupling(rho: f64, gamma: f64, bounds: &BoundEstimates, constraints: usize) -> CouplingReport {
    let c_f = bounds.c_subgrad.value;
    let lhs = (rho * gamma).powi(2);
    if c_f == 0.0 {
        return CouplingReport {
            lhs,
            rhs: f64::INFINITY,
            margin: f64::INFINITY,
            c_f,
            passed: true,
        };
    }
    let rhs = constraints as f64 / (120.0 * c_f * c_f);
    CouplingReport {
        lhs,
        rhs,
        margin: rhs - lhs,
        c_f,
        passed: lhs <= rhs,
    }
}

/// What happened in the most recent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub rho: f64,
    pub gamma: f64,
    pub t: f64,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub k: u64,
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `sum_{i<=k} t_i x_i`
    pub weighted_sum: Vec<f64>,
    /// `sum_{i<=k} t_i`
    pub weight_total: f64,
    pub last_step: Option<StepInfo>,
    /// `max_{i<=k} ||lambda_i||^2`
    pub lambda_sq_max: f64,
}

impl SolverState {
    /// Weighted ergodic average of `x_0..x_k`.
    pub fn ergodic_average(&self) -> Vec<f64> {
        self.weighted_sum.iter().map(|s| s / self.weight_total).collect()
    }
}

/// Stepper holding the two random streams and scratch buffers.
pub struct Rlsa<'a> {
    instance: &'a ProblemInstance,
    config: &'a SolverConfig,
    noise_rng: ChaCha8Rng,
    index_rng: ChaCha8Rng,
    noise: Vec<f64>,
    mapping: Vec<f64>,
    subgrad: Vec<f64>,
    trial: Vec<f64>,
}

impl<'a> Rlsa<'a> {
    pub fn new(instance: &'a ProblemInstance, config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        let n = instance.dim();
        let mut noise_rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
        noise_rng.set_stream(NOISE_STREAM);
        let mut index_rng = ChaCha8Rng::seed_from_u64(config.index_seed);
        index_rng.set_stream(INDEX_STREAM);
        Ok(Self {
            instance,
            config,
            noise_rng,
            index_rng,
            noise: vec![0.0; instance.mapping().noise_len()],
            mapping: vec![0.0; n],
            subgrad: vec![0.0; n],
            trial: vec![0.0; n],
        })
    }

    pub fn initial_state(&self) -> Result<SolverState> {
        let n = self.instance.dim();
        let x0 = match &self.config.x0 {
            Some(x0) => {
                if x0.len() != n || !self.instance.base().contains(x0, 1e-12) {
                    return Err(Error::InvalidArgument("x0 must be a point of X".into()));
                }
                x0.clone()
            }
            None => self.instance.base().project(&vec![0.0; n]),
        };
        let (_, _, t0) = step_sizes(0, self.config);
        Ok(SolverState {
            k: 0,
            weighted_sum: x0.iter().map(|v| t0 * v).collect(),
            weight_total: t0,
            x: x0,
            lambda: vec![0.0; self.instance.num_constraints()],
            last_step: None,
            lambda_sq_max: 0.0,
        })
    }

    /// Advances `state` from `k` to `k + 1`.
    pub fn step(&mut self, state: &mut SolverState) -> Result<()> {
        let k = state.k;
        let (rho, gamma, t) = step_sizes(k, self.config);
        let j = self.index_rng.random_range(0..self.instance.num_constraints());
        let mapping = self.instance.mapping();
        mapping.sample_noise(&mut self.noise_rng, &mut self.noise);
        mapping.eval(&state.x, &self.noise, &mut self.mapping);
        if let Some(c) = linalg::first_non_finite(&self.mapping) {
            return Err(Error::OracleEvaluation {
                coordinate: c,
                iteration: Some(k),
            });
        }

        let constraint = self.instance.constraint(j);
        let fj = constraint.value(&state.x);
        let old = state.lambda[j];
        let new = (rho * fj + old).max(0.0);
        state.lambda[j] = new;

        for i in 0..self.trial.len() {
            self.trial[i] = state.x[i] - gamma * self.mapping[i];
        }
        if new > 0.0 {
            constraint.subgradient(&state.x, &mut self.subgrad);
            linalg::axpy(-gamma * new, &self.subgrad, &mut self.trial);
        }
        if let Some(c) = linalg::first_non_finite(&self.trial) {
            return Err(Error::OracleEvaluation {
                coordinate: c,
                iteration: Some(k),
            });
        }
        self.instance.base().project_into(&self.trial, &mut state.x);

        state.k = k + 1;
        let (_, _, t_next) = step_sizes(state.k, self.config);
        linalg::axpy(t_next, &state.x, &mut state.weighted_sum);
        state.weight_total += t_next;
        state.lambda_sq_max = state.lambda_sq_max.max(linalg::norm_sq(&state.lambda));
        state.last_step = Some(StepInfo {
            rho,
            gamma,
            t,
            index: j,
        });
        Ok(())
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub state: SolverState,
    pub xbar: Vec<f64>,
    pub trace: Vec<TraceRecord>,
    pub wall_time: Duration,
    pub config: SolverConfig,
    pub coupling: Option<CouplingReport>,
}

enum GapEvaluator {
    None,
    Affine { inner_tol: f64, inner_budget: usize },
    Sampled(SampledGapOracle),
}

impl GapEvaluator {
    fn new(instance: &ProblemInstance, options: &GapOptions) -> Result<Self> {
        Ok(match options {
            GapOptions::None => GapEvaluator::None,
            GapOptions::Affine {
                inner_tol,
                inner_budget,
            } => GapEvaluator::Affine {
                inner_tol: *inner_tol,
                inner_budget: *inner_budget,
            },
            GapOptions::Sampled { budget, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                GapEvaluator::Sampled(SampledGapOracle::new(instance, *budget, &mut rng)?)
            }
        })
    }

    fn evaluate(&self, instance: &ProblemInstance, xbar: &[f64]) -> Result<Option<GapEstimate>> {
        Ok(match self {
            GapEvaluator::None => None,
            GapEvaluator::Affine {
                inner_tol,
                inner_budget,
            } => Some(dual_gap_affine(instance, xbar, *inner_tol, *inner_budget)?),
            GapEvaluator::Sampled(oracle) => Some(oracle.evaluate(xbar)),
        })
    }
}

/// Estimates the problem constants the same way every run does.
pub fn coupling_bounds(instance: &ProblemInstance, config: &SolverConfig) -> Result<BoundEstimates> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.noise_seed);
    rng.set_stream(BOUNDS_STREAM);
    estimate_bounds(instance, COUPLING_SAMPLE_BUDGET, DEFAULT_SAFETY_FACTOR, &mut rng)
}

pub fn run(instance: &ProblemInstance, config: &SolverConfig) -> Result<RunResult> {
    run_with_sink(instance, config, &mut |_| {})
}

/// Runs `config.iterations` steps, emitting a trace record at every checkpoint.
pub fn run_with_sink(
    instance: &ProblemInstance,
    config: &SolverConfig,
    sink: &mut dyn FnMut(&TraceRecord),
) -> Result<RunResult> {
    config.validate()?;
    let coupling = if config.check_coupling {
        let bounds = coupling_bounds(instance, config)?;
        let report = check_coupling(config.rho0, config.gamma0, &bounds, instance.num_constraints());
        if !report.passed {
            return Err(Error::Coupling {
                lhs: report.lhs,
                rhs: report.rhs,
                rho: config.rho0,
                gamma: config.gamma0,
                c_f: report.c_f,
                constraints: instance.num_constraints(),
            });
        }
        Some(report)
    } else {
        None
    };

    let start = Instant::now();
    let gap = GapEvaluator::new(instance, &config.gap)?;
    let mut solver = Rlsa::new(instance, config)?;
    let mut state = solver.initial_state()?;
    let checkpoints = config.checkpoints.resolve(config.iterations);
    let mut trace = Vec::with_capacity(checkpoints.len());
    let mut next = checkpoints.iter().copied().peekable();
    loop {
        if next.peek() == Some(&state.k) {
            next.next();
            let record = checkpoint_record(instance, config, &state, &gap, start)?;
            sink(&record);
            trace.push(record);
        }
        if state.k >= config.iterations {
            break;
        }
        solver.step(&mut state)?;
    }
    let xbar = state.ergodic_average();
    Ok(RunResult {
        xbar,
        state,
        trace,
        wall_time: start.elapsed(),
        config: config.clone(),
        coupling,
    })
}

fn checkpoint_record(
    instance: &ProblemInstance,
    config: &SolverConfig,
    state: &SolverState,
    gap: &GapEvaluator,
    start: Instant,
) -> Result<TraceRecord> {
    let (rho_k, gamma_k, t_k) = step_sizes(state.k, config);
    let xbar = state.ergodic_average();
    let estimate = gap.evaluate(instance, &xbar)?;
    Ok(TraceRecord {
        k: state.k,
        rho_k,
        gamma_k,
        t_k,
        infeas_xbar: infeasibility(&xbar, instance),
        gap_xbar: estimate.as_ref().map(|g| g.value),
        gap_method: estimate.as_ref().map(|g| g.method),
        lambda_norm: linalg::norm(&state.lambda),
        wall_ms: if config.record_wall_time {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        },
        xbar_feasible: instance.is_feasible(&xbar, 1e-12),
    })
}
