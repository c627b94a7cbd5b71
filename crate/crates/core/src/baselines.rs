//! Desk-scale reference solvers: Dykstra projection onto the feasible set
//! `X ∩ {f_j <= 0}` and deterministic projected extragradient.
//!
//! Both exist to certify stochastic solutions. They project onto the full
//! feasible set every step, which is exactly the cost the randomized
//! method avoids, and they are slow at scale.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::metrics::{kkt_residual, KktResidual};
use crate::problem::{BaseSet, ProblemInstance};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// Full Dykstra cycles performed.
    pub iterations: usize,
    /// Change of the iterate and corrections over the last cycle.
    pub correction_norm: f64,
    pub converged: bool,
}

/// Nearest point of `X ∩ {f_j <= 0}` by cyclic Dykstra corrections.
///
/// The cycle visits every sublevel set and then `X`, so the returned point
/// lies in `X` exactly. Sublevel projections are closed form for balls and
/// halfspaces and use bisection on the scalar multiplier otherwise.
pub fn dykstra_project(
    y: &[f64],
    instance: &ProblemInstance,
    tol: f64,
    budget: usize,
) -> Result<ProjectionResult> {
    let n = instance.dim();
    if y.len() != n {
        return Err(Error::InvalidArgument(format!(
            "point has length {}, expected {n}",
            y.len()
        )));
    }
    let sets = instance.num_constraints() + 1;
    let mut x = y.to_vec();
    let mut corrections = vec![vec![0.0; n]; sets];
    let mut z = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    let mut cycles = 0;
    while cycles < budget.max(1) {
        cycles += 1;
        let start = x.clone();
        let mut moved = 0.0;
        for (s, p) in corrections.iter_mut().enumerate() {
            for i in 0..n {
                z[i] = x[i] + p[i];
            }
            if s < sets - 1 {
                instance.constraint(s).project_sublevel(&z, &mut next);
            } else {
                instance.base().project_into(&z, &mut next);
            }
            for i in 0..n {
                let np = z[i] - next[i];
                moved += (np - p[i]) * (np - p[i]);
                p[i] = np;
            }
            x.copy_from_slice(&next);
        }
        change = moved.sqrt().max(linalg::dist(&x, &start));
        if change < tol {
            break;
        }
    }
    Ok(ProjectionResult {
        point: x,
        iterations: cycles,
        correction_norm: change,
        converged: change < tol,
    })
}

/// Tolerances for [`projected_extragradient`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtragradientOptions {
    /// Step size; `None` uses `0.5 / L` for affine mappings.
    pub step: Option<f64>,
    pub iterations: usize,
    pub tol: f64,
    pub projection_tol: f64,
    pub projection_budget: usize,
    /// Constraints with `f_j(x) >= -activity_tol` enter multiplier recovery.
    pub activity_tol: f64,
}

impl Default for ExtragradientOptions {
    fn default() -> Self {
        Self {
            step: None,
            iterations: 200_000,
            tol: 1e-11,
            projection_tol: 1e-14,
            projection_budget: 20_000,
            activity_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtragradientResult {
    pub x: Vec<f64>,
    /// Multipliers recovered by nonnegative least squares on active constraints.
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub last_step_norm: f64,
    pub converged: bool,
    pub step: f64,
    pub kkt: KktResidual,
}

/// Spectral norm of the affine mapping matrix, i.e. the Lipschitz constant of `F`.
pub fn affine_lipschitz(instance: &ProblemInstance) -> Option<f64> {
    instance
        .affine_parts()
        .map(|(a, _)| a.clone().svd(false, false).singular_values.max())
}

/// Classic two-step extragradient on the mean mapping with Dykstra as the
/// projection, followed by multiplier recovery and KKT certification.
pub fn projected_extragradient(
    instance: &ProblemInstance,
    options: &ExtragradientOptions,
) -> Result<ExtragradientResult> {
    let lipschitz = affine_lipschitz(instance);
    let step = match (options.step, lipschitz) {
        (Some(s), Some(l)) if s * l > 1.0 + 1e-12 => {
            return Err(Error::InvalidArgument(format!(
                "extragradient step {s} exceeds 1/L = {}",
                1.0 / l
            )))
        }
        (Some(s), _) if s > 0.0 => s,
        (Some(s), _) => {
            return Err(Error::InvalidArgument(format!("step must be positive, got {s}")))
        }
        (None, Some(l)) if l > 0.0 => 0.5 / l,
        (None, Some(_)) => 1.0,
        (None, None) => {
            return Err(Error::InvalidArgument(
                "non-affine mapping requires an explicit step".into(),
            ))
        }
    };
    let n = instance.dim();
    let project = |y: &[f64]| -> Result<Vec<f64>> {
        Ok(dykstra_project(y, instance, options.projection_tol, options.projection_budget)?.point)
    };
    let mut x = project(&instance.base().project(&vec![0.0; n]))?;
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut last = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.iterations {
        iterations += 1;
        instance.mapping().mean(&x, &mut fx);
        for i in 0..n {
            trial[i] = x[i] - step * fx[i];
        }
        let y = project(&trial)?;
        instance.mapping().mean(&y, &mut fy);
        for i in 0..n {
            trial[i] = x[i] - step * fy[i];
        }
        let next = project(&trial)?;
        last = linalg::dist(&next, &x);
        x = next;
        if last <= options.tol {
            converged = true;
            break;
        }
    }
    let lambda = recover_multipliers(instance, &x, options.activity_tol)?;
    let kkt = kkt_residual(instance, &x, &lambda);
    Ok(ExtragradientResult {
        x,
        lambda,
        iterations,
        last_step_norm: last,
        converged,
        step,
        kkt,
    })
}

/// Fits `lambda >= 0` to `F(x) + J^{-1} sum_j lambda_j g_j(x) + N_X(x) ∋ 0`
/// over the constraints active at `x`, with active faces of `X` as extra
/// nonnegative columns.
pub fn recover_multipliers(
    instance: &ProblemInstance,
    x: &[f64],
    activity_tol: f64,
) -> Result<Vec<f64>> {
    let n = instance.dim();
    let jn = instance.num_constraints();
    let f = instance.mean_mapping(x);
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut owners: Vec<Option<usize>> = Vec::new();
    for j in 0..jn {
        if instance.constraint(j).value(x) >= -activity_tol {
            let mut g = instance.subgradient(j, x);
            g.iter_mut().for_each(|v| *v /= jn as f64);
            columns.push(g);
            owners.push(Some(j));
        }
    }
    match instance.base() {
        BaseSet::Box { lower, upper } => {
            for i in 0..n {
                let mut e = vec![0.0; n];
                if x[i] >= upper[i] - activity_tol {
                    e[i] = 1.0;
                } else if x[i] <= lower[i] + activity_tol {
                    e[i] = -1.0;
                } else {
                    continue;
                }
                columns.push(e);
                owners.push(None);
            }
        }
        BaseSet::Ball { center, radius } => {
            let d = linalg::dist(x, center);
            if d >= radius - activity_tol && d > 0.0 {
                columns.push(x.iter().zip(center).map(|(a, c)| (a - c) / d).collect());
                owners.push(None);
            }
        }
    }
    let mut lambda = vec![0.0; jn];
    if columns.is_empty() {
        return Ok(lambda);
    }
    let c = DMatrix::from_fn(n, columns.len(), |r, k| columns[k][r]);
    let d = DVector::from_iterator(n, f.iter().map(|v| -v));
    let mu = nnls(&c, &d, 1e-13);
    for (k, owner) in owners.iter().enumerate() {
        if let Some(j) = owner {
            lambda[*j] = mu[k];
        }
    }
    Ok(lambda)
}

/// Lawson-Hanson nonnegative least squares: `min ||C z - d||, z >= 0`.
pub fn nnls(c: &DMatrix<f64>, d: &DVector<f64>, tol: f64) -> DVector<f64> {
    let p = c.ncols();
    let mut z = DVector::zeros(p);
    let mut passive = vec![false; p];
    let max_outer = 3 * p + 10;
    for _ in 0..max_outer {
        let w = c.transpose() * (d - c * &z);
        let candidate = (0..p)
            .filter(|&i| !passive[i])
            .max_by(|&a, &b| w[a].total_cmp(&w[b]));
        match candidate {
            Some(i) if w[i] > tol => passive[i] = true,
            _ => break,
        }
        loop {
            let s = solve_passive(c, d, &passive);
            let bad: Vec<usize> = (0..p).filter(|&i| passive[i] && s[i] <= 0.0).collect();
            if bad.is_empty() {
                z = s;
                break;
            }
            let alpha = bad
                .iter()
                .map(|&i| z[i] / (z[i] - s[i]))
                .fold(f64::INFINITY, f64::min);
            z = &z + (&s - &z) * alpha;
            for i in 0..p {
                if passive[i] && z[i] <= tol {
                    passive[i] = false;
                    z[i] = 0.0;
                }
            }
        }
    }
    z
}

fn solve_passive(c: &DMatrix<f64>, d: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&i| passive[i]).collect();
    let sub = c.select_columns(&idx);
    let sol = sub
        .svd(true, true)
        .solve(d, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(idx.len()));
    let mut s = DVector::zeros(passive.len());
    for (k, &i) in idx.iter().enumerate() {
        s[i] = sol[k];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{AffineMapping, Constraint, DiagonalQuadratic, NoiseModel};
    use std::sync::Arc;

    fn instance(a: &[f64], b: &[f64], cs: Vec<Arc<dyn Constraint>>, base: BaseSet) -> ProblemInstance {
        let n = b.len();
        let m = AffineMapping::new(
            DMatrix::from_row_slice(n, n, a),
            DVector::from_row_slice(b),
            NoiseModel::None,
        )
        .unwrap();
        ProblemInstance::new(Arc::new(m), cs, base).unwrap()
    }

    fn unit_ball_in_box() -> ProblemInstance {
        instance(
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0],
            vec![Arc::new(DiagonalQuadratic::ball(vec![0.0, 0.0], 1.0))],
            BaseSet::cube(2, -2.0, 2.0),
        )
    }

    #[test]
    fn feasible_point_is_fixed_in_one_cycle() {
        let inst = unit_ball_in_box();
        let r = dykstra_project(&[0.3, -0.4], &inst, 1e-12, 100).unwrap();
        assert_eq!(r.point, vec![0.3, -0.4]);
        assert_eq!(r.iterations, 1);
        assert!(r.converged);
    }

    #[test]
    fn binding_ball() {
        let inst = unit_ball_in_box();
        let r = dykstra_project(&[2.0, 0.0], &inst, 1e-12, 100).unwrap();
        assert!(linalg::dist(&r.point, &[1.0, 0.0]) < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn two_balls_reach_nearest_point() {
        // Lens of two unit balls centered at (+-0.5, 0); nearest point to (0, 3)
        // is the upper corner (0, sqrt(0.75)).
        let inst = instance(
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0],
            vec![
                Arc::new(DiagonalQuadratic::ball(vec![0.5, 0.0], 1.0)),
                Arc::new(DiagonalQuadratic::ball(vec![-0.5, 0.0], 1.0)),
            ],
            BaseSet::cube(2, -3.0, 3.0),
        );
        let r = dykstra_project(&[0.0, 3.0], &inst, 1e-12, 100_000).unwrap();
        assert!(r.converged);
        assert!(linalg::dist(&r.point, &[0.0, 0.75f64.sqrt()]) < 1e-6, "{:?}", r.point);
        // Idempotent up to tolerance.
        let again = dykstra_project(&r.point, &inst, 1e-12, 100_000).unwrap();
        assert!(linalg::dist(&again.point, &r.point) < 2e-12);
    }

    #[test]
    fn nnls_matches_hand_solution() {
        // min ||z1 e1 + z2 e2 - (1, -1)||, z >= 0 -> (1, 0)
        let c = DMatrix::identity(2, 2);
        let d = DVector::from_row_slice(&[1.0, -1.0]);
        let z = nnls(&c, &d, 1e-14);
        assert!((z[0] - 1.0).abs() < 1e-14 && z[1] == 0.0);
        // Consistent overdetermined system.
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 0.0, 2.0]);
        let d = DVector::from_row_slice(&[2.0, 5.0, 6.0]);
        let z = nnls(&c, &d, 1e-14);
        assert!((z[0] - 2.0).abs() < 1e-12 && (z[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn extragradient_scalar_instance() {
        let inst = instance(
            &[1.0],
            &[-2.0],
            vec![Arc::new(DiagonalQuadratic::halfspace(vec![1.0], 1.0))],
            BaseSet::cube(1, -3.0, 3.0),
        );
        let r = projected_extragradient(&inst, &ExtragradientOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-8);
        assert!((r.lambda[0] - 1.0).abs() < 1e-6);
        assert!(r.kkt.max_violation() < 1e-6);
    }

    #[test]
    fn extragradient_interior_matches_linear_solve() {
        let a = [2.0, 0.5, -0.5, 1.0];
        let b = [-0.4, 0.3];
        let inst = instance(
            &a,
            &b,
            vec![Arc::new(DiagonalQuadratic::ball(vec![0.0, 0.0], 2.0))],
            BaseSet::cube(2, -3.0, 3.0),
        );
        let am = DMatrix::from_row_slice(2, 2, &a);
        let exact = am.lu().solve(&-DVector::from_row_slice(&b)).unwrap();
        let r = projected_extragradient(&inst, &ExtragradientOptions::default()).unwrap();
        assert!(r.converged);
        assert!(linalg::dist(&r.x, exact.as_slice()) < 1e-8);
        assert_eq!(r.lambda, vec![0.0]);
    }

    #[test]
    fn extragradient_handles_skew_saddle() {
        // F(u, v) = (v - 0.3, -u + 0.2) is a pure rotation; plain projected
        // gradient circles the saddle while extragradient converges to it.
        let inst = instance(
            &[0.0, 1.0, -1.0, 0.0],
            &[-0.3, 0.2],
            vec![Arc::new(DiagonalQuadratic::ball(vec![0.0, 0.0], 1.5))],
            BaseSet::cube(2, -1.0, 1.0),
        );
        let r = projected_extragradient(&inst, &ExtragradientOptions::default()).unwrap();
        assert!(r.converged);
        assert!(linalg::dist(&r.x, &[0.2, 0.3]) < 1e-8);
    }

    #[test]
    fn step_above_inverse_lipschitz_rejected() {
        let inst = unit_ball_in_box();
        let opts = ExtragradientOptions {
            step: Some(1.5),
            ..Default::default()
        };
        assert!(projected_extragradient(&inst, &opts).is_err());
    }
}
