//! Invariant suite behind `rlsa validate`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlsa_core::lagrangian::{delta_error, primal_subgrad_full, subgradient_bound};
use rlsa_core::metrics::dual_gap_affine;
use rlsa_core::problem::{check_monotonicity, estimate_bounds, find_slater_point, DEFAULT_SAFETY_FACTOR};
use rlsa_core::{linalg, BaseSet, ProblemInstance};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRow {
    pub instance: String,
    pub invariant: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Random `(x, lambda, rho)` states for the unbiasedness and variance checks.
    pub states: usize,
    /// Random states for the subgradient-norm check.
    pub norm_states: usize,
    pub monotone_pairs: usize,
    pub monotone_tol: f64,
    /// Grid budget for certifying `C_f` and `D_f`.
    pub bound_grid_budget: usize,
    /// Points per axis of the 2-D gap brute force.
    pub gap_grid: usize,
    pub gap_queries: usize,
    pub gap_tol: f64,
    pub slater_budget: usize,
    pub seed: u64,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self {
            states: 100,
            norm_states: 1000,
            monotone_pairs: 10_000,
            monotone_tol: 1e-10,
            bound_grid_budget: 200_000,
            gap_grid: 1000,
            gap_queries: 10,
            gap_tol: 1e-3,
            slater_budget: 5000,
            seed: 0,
        }
    }
}

/// Upper bounds on `sup ||g_j||` and `sup |f_j|` over `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifiedBounds {
    pub c_f: f64,
    pub d_f: f64,
    /// Grid points evaluated; 0 when the grid was too large and sampled
    /// estimates were used instead.
    pub grid_points: usize,
}

fn bounding_box(base: &BaseSet) -> (Vec<f64>, Vec<f64>) {
    match base {
        BaseSet::Box { lower, upper } => (lower.clone(), upper.clone()),
        BaseSet::Ball { center, radius } => (
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        ),
    }
}

/// Visits every point of a `per_axis^n` grid over `[lo, hi]`.
fn for_each_grid_point(lo: &[f64], hi: &[f64], per_axis: usize, mut f: impl FnMut(&[f64])) {
    let n = lo.len();
    let mut idx = vec![0usize; n];
    let mut x = lo.to_vec();
    let denom = (per_axis - 1).max(1) as f64;
    loop {
        for i in 0..n {
            x[i] = lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / denom;
        }
        f(&x);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            idx[i] += 1;
            if idx[i] < per_axis {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Grid maxima over the bounding box of `X` plus first-order slack: `C_f`
/// gains `L_g * h` with `L_g` the largest subgradient difference quotient
/// between grid neighbours, and `D_f` gains `C_f * h`, where `h` is the
/// half-diagonal of a grid cell.
pub fn certified_bounds(instance: &ProblemInstance, budget: usize) -> CertifiedBounds {
    let n = instance.dim();
    let per_axis = (budget as f64).powf(1.0 / n as f64).floor() as usize;
    if per_axis < 2 {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = estimate_bounds(instance, budget.max(1), DEFAULT_SAFETY_FACTOR, &mut rng)
            .expect("budget and safety factor are valid");
        return CertifiedBounds {
            c_f: b.c_subgrad.value,
            d_f: b.d_constraint.value,
            grid_points: 0,
        };
    }
    let (lo, hi) = bounding_box(instance.base());
    let steps: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / (per_axis - 1) as f64).collect();
    let half_diag = 0.5 * linalg::norm(&steps);
    let mut g = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut neighbour = vec![0.0; n];
    let (mut c_f, mut d_f, mut lip) = (0.0f64, 0.0f64, 0.0f64);
    let mut points = 0;
    for_each_grid_point(&lo, &hi, per_axis, |x| {
        points += 1;
        for c in instance.constraints() {
            d_f = d_f.max(c.value(x).abs());
            c.subgradient(x, &mut g);
            c_f = c_f.max(linalg::norm(&g));
            for i in 0..n {
                if steps[i] == 0.0 || x[i] + steps[i] > hi[i] + 1e-12 {
                    continue;
                }
                neighbour.copy_from_slice(x);
                neighbour[i] += steps[i];
                c.subgradient(&neighbour, &mut gn);
                lip = lip.max(linalg::dist(&g, &gn) / steps[i]);
            }
        }
    });
    let c_f = c_f + lip * half_diag;
    CertifiedBounds {
        c_f,
        d_f: d_f + c_f * half_diag,
        grid_points: points,
    }
}

fn random_state(instance: &ProblemInstance, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, f64) {
    let x = instance.base().sample_uniform(rng);
    let lambda = (0..instance.num_constraints()).map(|_| 2.0 * rng.random::<f64>()).collect();
    let rho = 10f64.powf(rng.random_range(-1.0..1.0));
    (x, lambda, rho)
}

fn row(instance: &str, invariant: &'static str, passed: bool, detail: String) -> CheckRow {
    CheckRow {
        instance: instance.to_string(),
        invariant,
        passed,
        detail,
    }
}

pub const UNBIASED_TOL: f64 = 1e-12;

/// Exhaustive mean over `j` of the coordinate error, and its second moment
/// against the bound, at random states.
fn delta_checks(label: &str, instance: &ProblemInstance, bounds: &CertifiedBounds, opts: &ValidateOptions) -> Vec<CheckRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let jn = instance.num_constraints();
    let n = instance.dim();
    let (mut worst_mean, mut worst_ratio) = (0.0f64, 0.0f64);
    for _ in 0..opts.states {
        let (x, lambda, rho) = random_state(instance, &mut rng);
        let mut mean = vec![0.0; n];
        let mut second = 0.0;
        for j in 0..jn {
            let d = delta_error(rho, &x, &lambda, j, instance).expect("state is valid");
            linalg::axpy(1.0 / jn as f64, &d, &mut mean);
            second += linalg::norm_sq(&d) / jn as f64;
        }
        worst_mean = worst_mean.max(mean.iter().fold(0.0, |m, v| m.max(v.abs())));
        let rhs = subgradient_bound(rho, bounds.c_f, bounds.d_f, &lambda);
        if rhs > 0.0 {
            worst_ratio = worst_ratio.max(second / rhs);
        } else if second > 0.0 {
            worst_ratio = f64::INFINITY;
        }
    }
    vec![
        row(
            label,
            "delta-unbiased",
            worst_mean <= UNBIASED_TOL,
            format!("max |mean_j delta| = {worst_mean:.3e} over {} states", opts.states),
        ),
        row(
            label,
            "delta-variance-bound",
            worst_ratio <= 1.0,
            format!(
                "max second moment / bound = {worst_ratio:.3e} (C_f = {:.4}, D_f = {:.4})",
                bounds.c_f, bounds.d_f
            ),
        ),
    ]
}

fn subgradient_norm_check(label: &str, instance: &ProblemInstance, bounds: &CertifiedBounds, opts: &ValidateOptions) -> CheckRow {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(1));
    let mut worst = 0.0f64;
    for _ in 0..opts.norm_states {
        let (x, lambda, rho) = random_state(instance, &mut rng);
        let g = primal_subgrad_full(rho, &x, &lambda, instance).expect("state is valid");
        let rhs = subgradient_bound(rho, bounds.c_f, bounds.d_f, &lambda);
        let lhs = linalg::norm_sq(&g);
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        } else if lhs > 0.0 {
            worst = f64::INFINITY;
        }
    }
    row(
        label,
        "subgradient-norm-bound",
        worst <= 1.0,
        format!("max ||grad||^2 / bound = {worst:.3e} over {} states", opts.norm_states),
    )
}

/// Feasible points of a `per_axis x per_axis` grid over the bounding box
/// of `X`, with their mapping values.
fn feasible_grid(instance: &ProblemInstance, per_axis: usize) -> Vec<([f64; 2], [f64; 2])> {
    let (lo, hi) = bounding_box(instance.base());
    let mut out = Vec::new();
    for_each_grid_point(&lo, &hi, per_axis, |y| {
        if instance.base().contains(y, 0.0) && instance.constraints().all(|c| c.value(y) <= 0.0) {
            let f = instance.mean_mapping(y);
            out.push(([y[0], y[1]], [f[0], f[1]]));
        }
    });
    out
}

pub fn grid_gap(grid: &[([f64; 2], [f64; 2])], x: &[f64]) -> f64 {
    grid.iter()
        .map(|(y, f)| f[0] * (x[0] - y[0]) + f[1] * (x[1] - y[1]))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn gap_grid_check(label: &str, instance: &ProblemInstance, opts: &ValidateOptions) -> CheckRow {
    let grid = feasible_grid(instance, opts.gap_grid);
    if grid.is_empty() {
        return row(label, "gap-oracle-vs-grid", false, "no feasible grid point".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(2));
    let mut worst = 0.0f64;
    for _ in 0..opts.gap_queries {
        let x = instance.base().sample_uniform(&mut rng);
        let oracle = match dual_gap_affine(instance, &x, 1e-10, 200_000) {
            Ok(g) => g.value,
            Err(e) => return row(label, "gap-oracle-vs-grid", false, e.to_string()),
        };
        worst = worst.max((oracle - grid_gap(&grid, &x)).abs());
    }
    row(
        label,
        "gap-oracle-vs-grid",
        worst <= opts.gap_tol,
        format!(
            "max |oracle - grid| = {worst:.3e} over {} queries, {} feasible grid points",
            opts.gap_queries,
            grid.len()
        ),
    )
}

/// Runs every applicable check on one instance.
pub fn validate_instance(label: &str, instance: &ProblemInstance, opts: &ValidateOptions) -> Vec<CheckRow> {
    let mut rows = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(3));
    let monotone = match check_monotonicity(instance, opts.monotone_pairs, opts.monotone_tol, &mut rng) {
        Ok(r) => {
            let detail = if r.passed {
                format!("min inner product {:.3e} over {} pairs", r.min_inner, r.pairs)
            } else {
                format!(
                    "min inner product {:.3e} at witness x = {:?}, y = {:?}",
                    r.min_inner, r.witness.0, r.witness.1
                )
            };
            rows.push(row(label, "monotonicity", r.passed, detail));
            r.passed
        }
        Err(e) => {
            rows.push(row(label, "monotonicity", false, e.to_string()));
            false
        }
    };
    let slater = find_slater_point(instance, opts.slater_budget);
    rows.push(row(
        label,
        "slater",
        slater.passed,
        format!("max_j f_j = {:.3e} at {:?}", slater.max_value, slater.point),
    ));
    let bounds = certified_bounds(instance, opts.bound_grid_budget);
    rows.extend(delta_checks(label, instance, &bounds, opts));
    rows.push(subgradient_norm_check(label, instance, &bounds, opts));
    if instance.dim() == 2 && instance.affine_parts().is_some() {
        if monotone {
            rows.push(gap_grid_check(label, instance, opts));
        } else {
            rows.push(row(
                label,
                "gap-oracle-vs-grid",
                true,
                "skipped: the concave gap oracle needs a monotone mapping".into(),
            ));
        }
    }
    rows
}

pub fn failures(rows: &[CheckRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| !r.passed)
        .map(|r| format!("{} on {}", r.invariant, r.instance))
        .collect()
}

pub fn render_table(rows: &[CheckRow]) -> String {
    let w_inst = rows.iter().map(|r| r.instance.len()).max().unwrap_or(8).max(8);
    let w_inv = rows.iter().map(|r| r.invariant.len()).max().unwrap_or(9).max(9);
    let mut out = String::new();
    let _ = writeln!(out, "{:<w_inst$}  {:<w_inv$}  {:<6}  detail", "instance", "invariant", "status");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<w_inst$}  {:<w_inv$}  {:<6}  {}",
            r.instance,
            r.invariant,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rlsa_core::problems::{make_non_monotone, scalar_reference};

    fn quick() -> ValidateOptions {
        ValidateOptions {
            states: 20,
            norm_states: 50,
            monotone_pairs: 500,
            gap_grid: 200,
            gap_queries: 3,
            gap_tol: 2e-2,
            ..Default::default()
        }
    }

    #[test]
    fn grid_visits_every_point() {
        let mut seen = Vec::new();
        for_each_grid_point(&[0.0, 0.0], &[1.0, 2.0], 3, |x| seen.push(x.to_vec()));
        assert_eq!(seen.len(), 9);
        assert_eq!(seen[0], vec![0.0, 0.0]);
        assert_eq!(seen[8], vec![1.0, 2.0]);
    }

    #[test]
    fn scalar_bounds_are_exact() {
        // f(y) = y - 1 on [-3, 3]: |f| <= 4, |f'| = 1.
        let inst = scalar_reference(0.1).unwrap();
        let b = certified_bounds(&inst, 1001);
        assert_eq!(b.c_f, 1.0);
        assert!((b.d_f - (4.0 + 0.003)).abs() < 1e-12);
    }

    #[test]
    fn single_constraint_is_exactly_unbiased() {
        let inst = scalar_reference(0.1).unwrap();
        let rows = validate_instance("scalar", &inst, &quick());
        let unbiased = rows.iter().find(|r| r.invariant == "delta-unbiased").unwrap();
        assert!(unbiased.passed);
        assert!(unbiased.detail.contains("0.000e0"));
        assert!(failures(&rows).is_empty(), "{}", render_table(&rows));
    }

    #[test]
    fn non_monotone_fails_with_witness() {
        let inst = make_non_monotone(2).unwrap();
        let rows = validate_instance("neg", &inst, &quick());
        let m = rows.iter().find(|r| r.invariant == "monotonicity").unwrap();
        assert!(!m.passed);
        assert!(m.detail.contains("witness"));
        assert_eq!(failures(&rows), vec!["monotonicity on neg".to_string()]);
    }
}
