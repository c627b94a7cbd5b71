//! Fixtures shared by the criterion benches.

use rlsa_core::{GapOptions, InstanceDescriptor, ProblemInstance, SolverConfig};

/// Instances of increasing size used across benches.
pub fn bench_instances() -> Vec<(String, ProblemInstance)> {
    [
        InstanceDescriptor::affine_vi(7, 5, 10, 0.1),
        InstanceDescriptor::affine_vi(2, 20, 50, 0.1),
        InstanceDescriptor::nash_cournot(5, 3, 0.1),
    ]
    .into_iter()
    .map(|d| (d.label(), d.build().expect("bench instance builds")))
    .collect()
}

/// Solver settings without gap evaluation, so runs time the iteration only.
pub fn step_config(iterations: u64) -> SolverConfig {
    SolverConfig {
        rho0: 10.0,
        gamma0: 0.3,
        iterations,
        gap: GapOptions::None,
        ..Default::default()
    }
}
