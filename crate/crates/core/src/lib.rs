//! Randomized Lagrangian stochastic approximation (RLSA) for stochastic
//! monotone variational inequalities with many functional constraints.
//!
//! The solver draws one constraint index per iteration, updates that single
//! multiplier, and takes a projected stochastic primal step onto a simple
//! base set `X`. The full feasible set `X ∩ {f_j <= 0}` is never projected
//! onto; [`baselines`] does that only to certify results.
//!
//! Modules:
//! - [`problem`]: oracles, base sets, bound and monotonicity diagnostics
//! - [`lagrangian`]: penalized Lagrangian and the coordinate error terms
//! - [`solver`]: step sizes, the iteration, and traced runs
//! - [`metrics`]: infeasibility, dual gap, KKT residuals, rate fits
//! - [`problems`]: the seeded instance zoo
//! - [`baselines`]: Dykstra projection and projected extragradient

pub mod baselines;
pub mod error;
pub mod lagrangian;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod problems;
pub mod solver;

pub use error::{Error, Result};
pub use metrics::{GapEstimate, GapMethod, KktResidual, RateFit, TraceMetric, TraceRecord};
pub use problem::{BaseSet, BoundEstimates, ProblemInstance};
pub use problems::InstanceDescriptor;
pub use solver::{run, run_with_sink, Checkpoints, GapOptions, RunResult, Schedule, SolverConfig, SolverState};
