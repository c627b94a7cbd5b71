use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rlsa_bench::{bench_instances, step_config};
use rlsa_core::baselines::dykstra_project;
use rlsa_core::metrics::{dual_gap_affine, SampledGapOracle, DEFAULT_INNER_BUDGET, DEFAULT_INNER_TOL};
use rlsa_core::solver::Rlsa;
use rlsa_core::Checkpoints;

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("rlsa_steps");
    const STEPS: u64 = 10_000;
    group.throughput(Throughput::Elements(STEPS));
    for (label, inst) in bench_instances() {
        let cfg = step_config(STEPS);
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| {
                let mut solver = Rlsa::new(&inst, &cfg).unwrap();
                let mut state = solver.initial_state().unwrap();
                for _ in 0..STEPS {
                    solver.step(&mut state).unwrap();
                }
                black_box(state.lambda_sq_max)
            })
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let (label, inst) = bench_instances().swap_remove(0);
    let cfg = rlsa_core::SolverConfig {
        checkpoints: Checkpoints::Geometric,
        ..step_config(100_000)
    };
    c.bench_function(&format!("run_100k/{label}"), |b| b.iter(|| black_box(rlsa_core::run(&inst, &cfg).unwrap().xbar)));
}

fn projection(c: &mut Criterion) {
    let mut group = c.benchmark_group("dykstra");
    for (label, inst) in bench_instances() {
        let y: Vec<f64> = (0..inst.dim()).map(|i| 2.0 + i as f64 * 0.1).collect();
        group.bench_function(BenchmarkId::from_parameter(&label), |b| {
            b.iter(|| black_box(dykstra_project(&y, &inst, 1e-10, 10_000).unwrap().iterations))
        });
    }
    group.finish();
}

fn gap_oracles(c: &mut Criterion) {
    let mut group = c.benchmark_group("gap");
    group.sample_size(20);
    for (label, inst) in bench_instances() {
        let x = inst.base().project(&vec![0.3; inst.dim()]);
        group.bench_function(BenchmarkId::new("affine", &label), |b| {
            b.iter(|| black_box(dual_gap_affine(&inst, &x, DEFAULT_INNER_TOL, DEFAULT_INNER_BUDGET).unwrap().value))
        });
        let oracle = SampledGapOracle::new(&inst, 20_000, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        group.bench_function(BenchmarkId::new("sampled", &label), |b| b.iter(|| black_box(oracle.evaluate(&x).value)));
    }
    group.finish();
}

criterion_group!(benches, steps, full_run, projection, gap_oracles);
criterion_main!(benches);
