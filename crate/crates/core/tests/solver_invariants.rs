use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rlsa_core::metrics::infeasibility;
use rlsa_core::problem::{AffineMapping, Constraint, DiagonalQuadratic, NoiseModel};
use rlsa_core::problems::make_affine_vi;
use rlsa_core::solver::{step_sizes, Rlsa};
use rlsa_core::{run, BaseSet, Checkpoints, GapOptions, InstanceDescriptor, ProblemInstance, SolverConfig};

fn config(noise_seed: u64, index_seed: u64, iterations: u64) -> SolverConfig {
    SolverConfig {
        rho0: 2.0,
        gamma0: 0.5,
        iterations,
        noise_seed,
        index_seed,
        gap: GapOptions::None,
        ..Default::default()
    }
}

/// Affine map with `J` halfspaces `x_0 <= 10 + j`, none of which can bind on `[-1, 1]^2`.
fn slack_instance(noise: f64, constraints: usize) -> ProblemInstance {
    let m = AffineMapping::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]),
        DVector::from_row_slice(&[0.3, -0.2]),
        NoiseModel::Additive { level: noise },
    )
    .unwrap();
    let cs: Vec<Arc<dyn Constraint>> = (0..constraints)
        .map(|j| Arc::new(DiagonalQuadratic::halfspace(vec![1.0, 0.0], 10.0 + j as f64)) as Arc<dyn Constraint>)
        .collect();
    ProblemInstance::new(Arc::new(m), cs, BaseSet::cube(2, -1.0, 1.0)).unwrap()
}

/// Trajectory of `(x_k, lambda_k, j_k)` for `k = 0..=iterations`.
fn trajectory(inst: &ProblemInstance, cfg: &SolverConfig) -> Vec<(Vec<f64>, Vec<f64>, Option<usize>)> {
    let mut solver = Rlsa::new(inst, cfg).unwrap();
    let mut state = solver.initial_state().unwrap();
    let mut out = vec![(state.x.clone(), state.lambda.clone(), None)];
    for _ in 0..cfg.iterations {
        solver.step(&mut state).unwrap();
        out.push((state.x.clone(), state.lambda.clone(), state.last_step.map(|s| s.index)));
    }
    out
}

#[test]
fn index_seed_changes_indices_but_not_noise() {
    // With slack constraints the primal path depends on the noise only.
    let inst = slack_instance(0.5, 7);
    let a = trajectory(&inst, &config(11, 1, 300));
    let b = trajectory(&inst, &config(11, 2, 300));
    assert!(a.iter().zip(&b).all(|(p, q)| p.0 == q.0));
    assert!(a.iter().zip(&b).any(|(p, q)| p.2 != q.2));
}

#[test]
fn noise_seed_changes_noise_but_not_indices() {
    let inst = slack_instance(0.5, 7);
    let a = trajectory(&inst, &config(1, 5, 300));
    let b = trajectory(&inst, &config(2, 5, 300));
    assert!(a.iter().zip(&b).all(|(p, q)| p.2 == q.2));
    assert!(a.iter().zip(&b).any(|(p, q)| p.0 != q.0));
}

#[test]
fn deterministic_single_constraint_runs_are_seed_free() {
    let inst = make_affine_vi(4, 3, 1, 0.0).unwrap();
    let a = trajectory(&inst, &config(1, 2, 500));
    let b = trajectory(&inst, &config(98, 99, 500));
    assert_eq!(a, b);
}

#[test]
fn ergodic_average_matches_offline_recomputation() {
    let inst = make_affine_vi(2, 4, 6, 0.1).unwrap();
    let cfg = config(3, 4, 1000);
    let path = trajectory(&inst, &cfg);
    let res = run(&inst, &cfg).unwrap();
    let mut num = vec![0.0; 4];
    let mut den = 0.0;
    for (k, (x, _, _)) in path.iter().enumerate() {
        let (_, _, t) = step_sizes(k as u64, &cfg);
        for i in 0..4 {
            num[i] += t * x[i];
        }
        den += t;
    }
    for i in 0..4 {
        let offline = num[i] / den;
        assert!((res.xbar[i] - offline).abs() <= 1e-10 * offline.abs().max(1e-300), "{i}");
    }
    let max_sq = path
        .iter()
        .map(|(_, l, _)| l.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max);
    assert_eq!(res.state.lambda_sq_max, max_sq);
}

#[test]
fn slack_constraints_give_projected_stochastic_approximation() {
    let inst = slack_instance(0.0, 3);
    let cfg = config(0, 0, 200);
    let path = trajectory(&inst, &cfg);
    let mut x = inst.base().project(&[0.0, 0.0]);
    for (k, (xk, lk, _)) in path.iter().enumerate() {
        assert!(lk.iter().all(|l| *l == 0.0));
        assert_eq!(xk, &x);
        let (_, gamma, _) = step_sizes(k as u64, &cfg);
        let f = inst.mean_mapping(&x);
        let trial: Vec<f64> = x.iter().zip(&f).map(|(a, b)| a - gamma * b).collect();
        x = inst.base().project(&trial);
    }
}

#[test]
fn infeasibility_decreases_over_decades() {
    let inst = InstanceDescriptor::affine_vi(7, 5, 10, 0.1).build().unwrap();
    let cfg = SolverConfig {
        rho0: 1.0,
        gamma0: 1.0,
        iterations: 100_000,
        checkpoints: Checkpoints::Explicit(vec![100, 1000, 10_000]),
        gap: GapOptions::None,
        ..Default::default()
    };
    let mut means = [0.0; 4];
    for seed in 0..8 {
        let res = run(&inst, &SolverConfig { noise_seed: seed, index_seed: seed, ..cfg.clone() }).unwrap();
        for (slot, k) in [100u64, 1000, 10_000, 100_000].iter().enumerate() {
            means[slot] += res.trace.iter().find(|t| t.k == *k).unwrap().infeas_xbar / 8.0;
        }
        assert_eq!(res.trace.last().unwrap().infeas_xbar, infeasibility(&res.xbar, &inst));
    }
    assert!(means[0] > 0.0 && means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn trace_checkpoints_include_final_iteration() {
    let inst = make_affine_vi(1, 2, 2, 0.1).unwrap();
    let res = run(&inst, &config(0, 0, 100)).unwrap();
    let ks: Vec<u64> = res.trace.iter().map(|t| t.k).collect();
    assert_eq!(ks, vec![0, 1, 2, 4, 8, 16, 32, 64, 100]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `x_k` in `X`, `lambda_k >= 0`, and at most one multiplier moves per step.
    #[test]
    fn step_invariants(seed in 0u64..1000, noise_seed in 0u64..1000, index_seed in 0u64..1000) {
        let inst = make_affine_vi(seed % 5, 3, 5, 0.2).unwrap();
        let cfg = SolverConfig { rho0: 5.0, gamma0: 0.5, ..config(noise_seed, index_seed, 400) };
        let path = trajectory(&inst, &cfg);
        for w in path.windows(2) {
            let (x, l, j) = &w[1];
            prop_assert!(inst.base().contains(x, 1e-12));
            prop_assert!(l.iter().all(|v| *v >= 0.0));
            let changed: Vec<usize> = (0..l.len()).filter(|i| l[*i] != w[0].1[*i]).collect();
            prop_assert!(changed.len() <= 1);
            if let Some(c) = changed.first() {
                prop_assert_eq!(Some(*c), *j);
            }
        }
    }

    /// The ergodic average is a convex combination of points of `X`.
    #[test]
    fn average_stays_in_base_set(seed in 0u64..1000) {
        let inst = make_affine_vi(seed % 3, 2, 3, 0.5).unwrap();
        let res = run(&inst, &config(seed, seed + 1, 300)).unwrap();
        prop_assert!(inst.base().contains(&res.xbar, 1e-12));
    }
}
