//! Penalized Lagrangian `Phi_rho(x, lambda) = (1/J) sum_j phi_rho(f_j(x), lambda_j)`
//! and the randomized-coordinate error terms built from it.

use crate::error::{Error, Result};
use crate::problem::ProblemInstance;

/// Which piece of `phi_rho` was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `rho * u + v >= 0`
    Active,
    Inactive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyEval {
    pub value: f64,
    pub branch: Branch,
    pub rho: f64,
    pub u: f64,
    pub v: f64,
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rho must be positive, got {rho}")))
    }
}

fn check_lambda(instance: &ProblemInstance, lambda: &[f64]) -> Result<()> {
    if lambda.len() != instance.num_constraints() {
        return Err(Error::InvalidArgument(format!(
            "lambda has length {}, expected {}",
            lambda.len(),
            instance.num_constraints()
        )));
    }
    if let Some(j) = lambda.iter().position(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "lambda[{j}] = {} is negative",
            lambda[j]
        )));
    }
    Ok(())
}

fn check_index(instance: &ProblemInstance, j: usize) -> Result<()> {
    if j < instance.num_constraints() {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange {
            index: j,
            len: instance.num_constraints(),
        })
    }
}

/// `u v + rho u^2 / 2` if `rho u + v >= 0`, else `-v^2 / (2 rho)`.
pub fn phi(rho: f64, u: f64, v: f64) -> Result<PenaltyEval> {
    check_rho(rho)?;
    let (value, branch) = if rho * u + v >= 0.0 {
        (u * v + 0.5 * rho * u * u, Branch::Active)
    } else {
        (-v * v / (2.0 * rho), Branch::Inactive)
    };
    Ok(PenaltyEval {
        value,
        branch,
        rho,
        u,
        v,
    })
}

pub fn big_phi(rho: f64, x: &[f64], lambda: &[f64], instance: &ProblemInstance) -> Result<f64> {
    check_rho(rho)?;
    check_lambda(instance, lambda)?;
    let mut acc = 0.0;
    for (c, l) in instance.constraints().zip(lambda) {
        acc += phi(rho, c.value(x), *l)?.value;
    }
    Ok(acc / instance.num_constraints() as f64)
}

#[inline]
fn hinge(rho: f64, fj: f64, lj: f64) -> f64 {
    (rho * fj + lj).max(0.0)
}

/// Full primal subgradient `(1/J) sum_j [rho f_j(x) + lambda_j]_+ g_j(x)`.
pub fn primal_subgrad_full(
    rho: f64,
    x: &[f64],
    lambda: &[f64],
    instance: &ProblemInstance,
) -> Result<Vec<f64>> {
    check_rho(rho)?;
    check_lambda(instance, lambda)?;
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut g = vec![0.0; n];
    for (c, l) in instance.constraints().zip(lambda) {
        let h = hinge(rho, c.value(x), *l);
        if h > 0.0 {
            c.subgradient(x, &mut g);
            crate::linalg::axpy(h, &g, &mut out);
        }
    }
    let inv = 1.0 / instance.num_constraints() as f64;
    out.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

/// Single-coordinate estimator `[rho f_j(x) + lambda_j]_+ g_j(x)`.
pub fn primal_subgrad_coord(
    rho: f64,
    x: &[f64],
    lambda: &[f64],
    j: usize,
    instance: &ProblemInstance,
) -> Result<Vec<f64>> {
    check_rho(rho)?;
    check_lambda(instance, lambda)?;
    check_index(instance, j)?;
    let c = instance.constraint(j);
    let h = hinge(rho, c.value(x), lambda[j]);
    let mut out = vec![0.0; x.len()];
    if h > 0.0 {
        c.subgradient(x, &mut out);
        out.iter_mut().for_each(|v| *v *= h);
    }
    Ok(out)
}

/// `primal_subgrad_coord(.., j) - primal_subgrad_full(..)`
pub fn delta_error(
    rho: f64,
    x: &[f64],
    lambda: &[f64],
    j: usize,
    instance: &ProblemInstance,
) -> Result<Vec<f64>> {
    let mut coord = primal_subgrad_coord(rho, x, lambda, j, instance)?;
    let full = primal_subgrad_full(rho, x, lambda, instance)?;
    for (c, f) in coord.iter_mut().zip(&full) {
        *c -= f;
    }
    Ok(coord)
}

/// Per-coordinate dual derivative `max(-lambda_j / rho, f_j(x))`.
pub fn dual_coord_value(
    rho: f64,
    x: &[f64],
    lambda: &[f64],
    j: usize,
    instance: &ProblemInstance,
) -> Result<f64> {
    check_rho(rho)?;
    check_lambda(instance, lambda)?;
    check_index(instance, j)?;
    Ok((-lambda[j] / rho).max(instance.constraint(j).value(x)))
}

/// Right-hand side of the subgradient-norm and delta-variance bounds:
/// `2 C_f^2 (rho^2 D_f^2 + ||lambda||^2 / J)`.
pub fn subgradient_bound(rho: f64, c_f: f64, d_f: f64, lambda: &[f64]) -> f64 {
    let j = lambda.len() as f64;
    2.0 * c_f * c_f * (rho * rho * d_f * d_f + crate::linalg::norm_sq(lambda) / j)
}
