//! Performance metrics: averaged infeasibility, the dual gap function,
//! KKT residuals, and log-log rate fitting over traces.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::baselines::dykstra_project;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ProblemInstance;

/// `(1/J) sum_j max(0, f_j(x))`
pub fn infeasibility(x: &[f64], instance: &ProblemInstance) -> f64 {
    let sum: f64 = instance.constraints().map(|c| c.value(x).max(0.0)).sum();
    sum / instance.num_constraints() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapMethod {
    ExactConcaveOracle,
    SampledLowerBound,
}

impl GapMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            GapMethod::ExactConcaveOracle => "exact-concave-oracle",
            GapMethod::SampledLowerBound => "sampled-lower-bound",
        }
    }
}

/// An estimate of `sup_{y feasible} F(y)^T (x - y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub value: f64,
    pub method: GapMethod,
    /// Ascent steps used by the concave oracle.
    pub inner_iterations: usize,
    /// Last ascent step norm.
    pub inner_step_norm: f64,
    pub converged: bool,
    /// Feasible candidates evaluated by the sampled bound.
    pub samples: usize,
}

pub const DEFAULT_INNER_TOL: f64 = 1e-8;
pub const DEFAULT_INNER_BUDGET: usize = 100_000;

/// Maximizes the concave quadratic `y -> (A y + b)^T (x_bar - y)` over the
/// feasible set by projected gradient ascent with Dykstra projections.
///
/// The objective's curvature is `-(A + A^T)`, which is negative semidefinite
/// whenever `A` is monotone; the step is `1 / ||A + A^T||`.
pub fn dual_gap_affine(
    instance: &ProblemInstance,
    x_bar: &[f64],
    inner_tol: f64,
    inner_budget: usize,
) -> Result<GapEstimate> {
    let (a, b) = instance.affine_parts().ok_or_else(|| {
        Error::InvalidArgument("the concave gap oracle needs an affine mean mapping".into())
    })?;
    let n = instance.dim();
    if x_bar.len() != n {
        return Err(Error::InvalidArgument("x_bar has wrong length".into()));
    }
    let sym = a + a.transpose();
    let curvature = sym.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // c = A^T x_bar - b is the gradient's constant part.
    let c: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|k| a[(k, i)] * x_bar[k]).sum::<f64>() - b[i])
        .collect();
    let step = if curvature > 1e-12 {
        1.0 / curvature
    } else {
        // Linear objective: a long step lands on the support point.
        let diam = 2.0 * instance.base().sup_norm() + 1.0;
        diam / linalg::norm(&c).max(1e-12)
    };
    let proj_tol = (inner_tol * 1e-3).max(1e-15);
    let proj_budget = 10_000;
    let mut y = dykstra_project(x_bar, instance, proj_tol, proj_budget)?.point;
    let mut trial = vec![0.0; n];
    let mut iterations = 0;
    let mut step_norm = f64::INFINITY;
    while iterations < inner_budget {
        iterations += 1;
        for i in 0..n {
            let mut g = c[i];
            for k in 0..n {
                g -= sym[(i, k)] * y[k];
            }
            trial[i] = y[i] + step * g;
        }
        let next = dykstra_project(&trial, instance, proj_tol, proj_budget)?.point;
        step_norm = linalg::dist(&next, &y);
        y = next;
        if step_norm <= inner_tol {
            break;
        }
    }
    Ok(GapEstimate {
        value: gap_supremand(instance, &y, x_bar),
        method: GapMethod::ExactConcaveOracle,
        inner_iterations: iterations,
        inner_step_norm: step_norm,
        converged: step_norm <= inner_tol,
        samples: 0,
    })
}

/// `F(y)^T (x - y)` on the mean mapping.
pub fn gap_supremand(instance: &ProblemInstance, y: &[f64], x: &[f64]) -> f64 {
    let fy = instance.mean_mapping(y);
    fy.iter().zip(x.iter().zip(y)).map(|(f, (xi, yi))| f * (xi - yi)).sum()
}

/// A fixed set of feasible candidates with their mapping values, reusable
/// across many query points.
#[derive(Debug, Clone)]
pub struct SampledGapOracle {
    candidates: Vec<(Vec<f64>, Vec<f64>)>,
    drawn: usize,
}

impl SampledGapOracle {
    /// Rejection-samples the base set against `f_j <= 0`; the known
    /// reference solution, if any, is always a candidate.
    pub fn new<R: RngCore>(instance: &ProblemInstance, sample_budget: usize, rng: &mut R) -> Result<Self> {
        let mut candidates = Vec::new();
        if let Some(r) = instance.reference() {
            candidates.push((r.x.clone(), instance.mean_mapping(&r.x)));
        }
        for _ in 0..sample_budget {
            let y = instance.base().sample_uniform(rng);
            if instance.constraints().all(|c| c.value(&y) <= 0.0) {
                let fy = instance.mean_mapping(&y);
                candidates.push((y, fy));
            }
        }
        if candidates.is_empty() {
            return Err(Error::NoFeasibleSamples { drawn: sample_budget });
        }
        Ok(Self {
            candidates,
            drawn: sample_budget,
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn evaluate(&self, x_bar: &[f64]) -> GapEstimate {
        let value = self
            .candidates
            .iter()
            .map(|(y, fy)| fy.iter().zip(x_bar.iter().zip(y)).map(|(f, (x, yi))| f * (x - yi)).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        GapEstimate {
            value,
            method: GapMethod::SampledLowerBound,
            inner_iterations: 0,
            inner_step_norm: 0.0,
            converged: true,
            samples: self.drawn,
        }
    }
}

/// Lower bound on the dual gap from sampled feasible candidates.
pub fn dual_gap_sampled<R: RngCore>(
    instance: &ProblemInstance,
    x_bar: &[f64],
    sample_budget: usize,
    rng: &mut R,
) -> Result<GapEstimate> {
    Ok(SampledGapOracle::new(instance, sample_budget, rng)?.evaluate(x_bar))
}

/// Residuals of the KKT system for `(x, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// `||P_X[x - (F(x) + J^{-1} sum_j lambda_j g_j(x))] - x||`
    pub stationarity: f64,
    /// `|lambda^T f(x)|`
    pub complementarity: f64,
    /// `max_j [f_j(x)]_+`
    pub primal_infeasibility: f64,
    /// `min_j lambda_j`; negative means dual infeasible.
    pub dual_feasibility: f64,
    /// `max(-min_j lambda_j, 0)`
    pub dual_infeasibility: f64,
    /// Distance from `x` to `X`.
    pub base_violation: f64,
}

impl KktResidual {
    pub fn max_violation(&self) -> f64 {
        self.stationarity
            .max(self.complementarity)
            .max(self.primal_infeasibility)
            .max(self.dual_infeasibility)
            .max(self.base_violation)
    }

    pub fn is_satisfied(&self, tol: f64) -> bool {
        self.max_violation() <= tol
    }
}

pub fn kkt_residual(instance: &ProblemInstance, x: &[f64], lambda: &[f64]) -> KktResidual {
    let n = instance.dim();
    let jn = instance.num_constraints() as f64;
    let mut grad = instance.mean_mapping(x);
    let mut g = vec![0.0; n];
    let mut complementarity = 0.0;
    let mut primal = 0.0f64;
    for (c, l) in instance.constraints().zip(lambda) {
        let fv = c.value(x);
        c.subgradient(x, &mut g);
        linalg::axpy(l / jn, &g, &mut grad);
        complementarity += l * fv;
        primal = primal.max(fv.max(0.0));
    }
    let trial: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - gi).collect();
    let projected = instance.base().project(&trial);
    let dual_min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    KktResidual {
        stationarity: linalg::dist(&projected, x),
        complementarity: complementarity.abs(),
        primal_infeasibility: primal,
        dual_feasibility: dual_min,
        dual_infeasibility: (-dual_min).max(0.0),
        base_violation: linalg::dist(&instance.base().project(x), x),
    }
}

/// One checkpoint row of a solver trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    pub rho_k: f64,
    pub gamma_k: f64,
    pub t_k: f64,
    pub infeas_xbar: f64,
    pub gap_xbar: Option<f64>,
    pub gap_method: Option<GapMethod>,
    pub lambda_norm: f64,
    pub wall_ms: f64,
    /// Whether `x_bar` lies in the feasible set (to 1e-12); not part of the CSV layout.
    #[serde(skip)]
    pub xbar_feasible: bool,
}

/// CSV header of the trace layout, in column order.
pub const TRACE_COLUMNS: [&str; 9] = [
    "k",
    "rho_k",
    "gamma_k",
    "t_k",
    "infeas_xbar",
    "gap_xbar",
    "gap_method",
    "lambda_norm",
    "wall_ms",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceMetric {
    Infeasibility,
    Gap,
    LambdaNorm,
}

impl TraceMetric {
    pub fn extract(self, r: &TraceRecord) -> Option<f64> {
        match self {
            TraceMetric::Infeasibility => Some(r.infeas_xbar),
            TraceMetric::Gap => r.gap_xbar,
            TraceMetric::LambdaNorm => Some(r.lambda_norm),
        }
    }
}

/// Least-squares fit of `ln(metric) = intercept + slope * ln(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 5;

/// Fits over points with `k >= k_min` (and `k >= 1`). Every value in range
/// must be positive.
pub fn rate_fit_points(points: &[(u64, f64)], k_min: u64) -> Result<RateFit> {
    let used: Vec<(u64, f64)> = points
        .iter()
        .copied()
        .filter(|(k, _)| *k >= k_min.max(1))
        .collect();
    if used.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            usable: used.len(),
            required: MIN_FIT_POINTS,
        });
    }
    if let Some((k, value)) = used.iter().copied().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::NonPositiveMetric { k, value });
    }
    let xs: Vec<f64> = used.iter().map(|(k, _)| (*k as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|(_, v)| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData {
            usable: 1,
            required: MIN_FIT_POINTS,
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: used.len(),
    })
}

pub fn rate_fit(trace: &[TraceRecord], metric: TraceMetric, k_min: u64) -> Result<RateFit> {
    let points: Vec<(u64, f64)> = trace
        .iter()
        .filter_map(|r| metric.extract(r).map(|v| (r.k, v)))
        .collect();
    rate_fit_points(&points, k_min)
}
