//! Seeded instance zoo: affine monotone VIs with planted KKT pairs,
//! constrained bilinear saddle problems, and Cournot games.
//!
//! Every instance is a pure function of its [`InstanceDescriptor`].

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{
    check_monotonicity, AffineMapping, BaseSet, Constraint, DiagonalQuadratic, NoiseModel,
    ProblemInstance,
};

const MAX_ATTEMPTS: usize = 32;
const MONOTONICITY_PAIRS: usize = 1000;
const MONOTONICITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    AffineVi,
    BilinearMinimax,
    NashCournot,
    /// The hand-solved scalar instance `F(y) = y - 2`, `f(y) = y - 1`, `X = [-3, 3]`.
    ScalarReference,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::AffineVi => "affine-vi",
            Family::BilinearMinimax => "bilinear-minimax",
            Family::NashCournot => "nash-cournot",
            Family::ScalarReference => "scalar-reference",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affine-vi" => Ok(Family::AffineVi),
            "bilinear-minimax" => Ok(Family::BilinearMinimax),
            "nash-cournot" => Ok(Family::NashCournot),
            "scalar-reference" => Ok(Family::ScalarReference),
            other => Err(Error::InvalidArgument(format!("unknown family '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "J", default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(rename = "J1", default, skip_serializing_if = "Option::is_none")]
    pub constraints1: Option<usize>,
    #[serde(rename = "J2", default, skip_serializing_if = "Option::is_none")]
    pub constraints2: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub players: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Number of constraints active at the planted solution (affine-vi).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active: Option<usize>,
    /// Per-player capacities (nash-cournot).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<f64>>,
    /// Identical player data (nash-cournot).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symmetric: Option<bool>,
}

/// Reconstructible description of a zoo instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub family: Family,
    pub seed: u64,
    pub dims: Dims,
    pub noise_level: f64,
    #[serde(default)]
    pub params: Params,
}

impl InstanceDescriptor {
    pub fn affine_vi(seed: u64, n: usize, constraints: usize, noise_level: f64) -> Self {
        Self {
            family: Family::AffineVi,
            seed,
            dims: Dims {
                n: Some(n),
                constraints: Some(constraints),
                ..Default::default()
            },
            noise_level,
            params: Params::default(),
        }
    }

    pub fn bilinear_minimax(seed: u64, n1: usize, n2: usize, j1: usize, j2: usize, noise_level: f64) -> Self {
        Self {
            family: Family::BilinearMinimax,
            seed,
            dims: Dims {
                n1: Some(n1),
                n2: Some(n2),
                constraints1: Some(j1),
                constraints2: Some(j2),
                ..Default::default()
            },
            noise_level,
            params: Params::default(),
        }
    }

    pub fn nash_cournot(seed: u64, players: usize, noise_level: f64) -> Self {
        Self {
            family: Family::NashCournot,
            seed,
            dims: Dims {
                players: Some(players),
                ..Default::default()
            },
            noise_level,
            params: Params::default(),
        }
    }

    pub fn scalar_reference(noise_level: f64) -> Self {
        Self {
            family: Family::ScalarReference,
            seed: 0,
            dims: Dims {
                n: Some(1),
                constraints: Some(1),
                ..Default::default()
            },
            noise_level,
            params: Params::default(),
        }
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = params;
        self
    }

    /// Short identifier such as `affine-vi-n5-J10-s7`.
    pub fn label(&self) -> String {
        let d = &self.dims;
        match self.family {
            Family::ScalarReference => format!("{}-n1-J1-s{}", self.family.as_str(), self.seed),
            Family::AffineVi => format!(
                "{}-n{}-J{}-s{}",
                self.family.as_str(),
                d.n.unwrap_or(0),
                d.constraints.unwrap_or(0),
                self.seed
            ),
            Family::BilinearMinimax => format!(
                "{}-{}x{}-J{}+{}-s{}",
                self.family.as_str(),
                d.n1.unwrap_or(0),
                d.n2.unwrap_or(0),
                d.constraints1.unwrap_or(0),
                d.constraints2.unwrap_or(0),
                self.seed
            ),
            Family::NashCournot => format!(
                "{}-N{}-s{}",
                self.family.as_str(),
                d.players.unwrap_or(0),
                self.seed
            ),
        }
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        let need = |v: Option<usize>, name: &str| {
            v.ok_or_else(|| Error::InvalidArgument(format!("descriptor is missing dims.{name}")))
        };
        match self.family {
            Family::AffineVi => make_affine_vi_with(
                self.seed,
                need(self.dims.n, "n")?,
                need(self.dims.constraints, "J")?,
                self.noise_level,
                &self.params,
            ),
            Family::BilinearMinimax => make_bilinear_minimax(
                self.seed,
                need(self.dims.n1, "n1")?,
                need(self.dims.n2, "n2")?,
                need(self.dims.constraints1, "J1")?,
                need(self.dims.constraints2, "J2")?,
                self.noise_level,
            ),
            Family::NashCournot => make_nash_cournot_with(
                self.seed,
                need(self.dims.players, "players")?,
                self.params.caps.clone(),
                self.params.symmetric.unwrap_or(false),
                self.noise_level,
            ),
            Family::ScalarReference => scalar_reference(self.noise_level),
        }
    }
}

/// Flattening of per-player constraint indices `(i, l) -> l + sum_{t<i} J_t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndex {
    offsets: Vec<usize>,
}

impl BlockIndex {
    pub fn new(counts: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0);
        for c in counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        Self { offsets }
    }

    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn flatten(&self, player: usize, local: usize) -> Option<usize> {
        let start = *self.offsets.get(player)?;
        let end = *self.offsets.get(player + 1)?;
        (start + local < end).then_some(start + local)
    }

    pub fn unflatten(&self, j: usize) -> Option<(usize, usize)> {
        if j >= self.total() {
            return None;
        }
        let player = self.offsets.partition_point(|&o| o <= j) - 1;
        Some((player, j - self.offsets[player]))
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let g = gaussian_vec(rng, n);
        let norm = linalg::norm(&g);
        if norm > 1e-8 {
            return g.iter().map(|v| v / norm).collect();
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn check_dims(pairs: &[(usize, &str)]) -> Result<()> {
    for (v, name) in pairs {
        if *v == 0 {
            return Err(Error::InvalidArgument(format!("{name} must be >= 1")));
        }
    }
    Ok(())
}

fn verify_monotone(instance: &ProblemInstance, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f_6e6f);
    let report = check_monotonicity(instance, MONOTONICITY_PAIRS, MONOTONICITY_TOL, &mut rng)?;
    if report.passed {
        Ok(())
    } else {
        Err(Error::InvalidInstance(format!(
            "mapping failed the monotonicity check (min inner product {})",
            report.min_inner
        )))
    }
}

/// One ball constraint `||x - c||^2 <= r^2` with its planted role.
struct PlantedBall {
    center: Vec<f64>,
    radius: f64,
    multiplier: f64,
}

/// Plants `active` balls with `x_star` on their boundary, opening towards a
/// common axis, and `count - active` balls containing `x_star` strictly.
/// Returns the balls and a strictly feasible point.
fn plant_balls(
    rng: &mut ChaCha8Rng,
    x_star: &[f64],
    count: usize,
    active: usize,
) -> Option<(Vec<PlantedBall>, Vec<f64>)> {
    let n = x_star.len();
    let axis = unit_vec(rng, n);
    let mut balls = Vec::with_capacity(count);
    for j in 0..count {
        if j < active {
            let dir = loop {
                let g = gaussian_vec(rng, n);
                let v: Vec<f64> = axis.iter().zip(&g).map(|(a, b)| a + 0.6 * b / (n as f64).sqrt()).collect();
                let norm = linalg::norm(&v);
                let u: Vec<f64> = v.iter().map(|x| x / norm).collect();
                if linalg::dot(&u, &axis) >= 0.5 || n == 1 {
                    break u;
                }
            };
            let radius = uniform(rng, 0.8, 1.5);
            balls.push(PlantedBall {
                center: x_star.iter().zip(&dir).map(|(x, u)| x + radius * u).collect(),
                radius,
                multiplier: uniform(rng, 0.5, 1.5),
            });
        } else {
            let dir = unit_vec(rng, n);
            let offset = uniform(rng, 0.0, 0.5);
            balls.push(PlantedBall {
                center: x_star.iter().zip(&dir).map(|(x, u)| x + offset * u).collect(),
                radius: offset + uniform(rng, 0.3, 0.8),
                multiplier: 0.0,
            });
        }
    }
    let min_active_r = balls[..active].iter().map(|b| b.radius).fold(f64::INFINITY, f64::min);
    let eps = if active > 0 { (0.25 * min_active_r).min(0.2) } else { 0.0 };
    let slater: Vec<f64> = x_star.iter().zip(&axis).map(|(x, a)| x + eps * a).collect();
    let strictly_feasible = balls
        .iter()
        .all(|b| linalg::dist(&slater, &b.center) < b.radius - 1e-9);
    strictly_feasible.then_some((balls, slater))
}

/// Random monotone affine VI with ball constraints and a planted KKT pair.
pub fn make_affine_vi(seed: u64, n: usize, constraints: usize, noise_level: f64) -> Result<ProblemInstance> {
    make_affine_vi_with(seed, n, constraints, noise_level, &Params::default())
}

/// `F(x, xi) = (M + S) x + b + xi` with `M = G^T G`, `S` skew, and
/// `xi ~ U[-noise, noise]^n`. Constraints are balls `||x - c_j||^2 - r_j^2`.
///
/// A solution `x*` and multipliers `lambda*` are drawn first; `b` is then
/// set so that `F(x*) + J^{-1} sum_j lambda*_j grad f_j(x*) = 0`. The box
/// `X` contains one whole ball, hence the feasible set, with margin.
pub fn make_affine_vi_with(
    seed: u64,
    n: usize,
    constraints: usize,
    noise_level: f64,
    params: &Params,
) -> Result<ProblemInstance> {
    check_dims(&[(n, "n"), (constraints, "J")])?;
    let active = params
        .active
        .unwrap_or_else(|| constraints.min(n.div_ceil(2)));
    if active > constraints {
        return Err(Error::InvalidArgument(format!(
            "active = {active} exceeds J = {constraints}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let g = DMatrix::from_fn(2 * n, n, |_, _| rng.sample::<f64, _>(StandardNormal) / ((2 * n) as f64).sqrt());
        let h = DMatrix::from_fn(n, n, |_, _| 0.5 * rng.sample::<f64, _>(StandardNormal) / (n as f64).sqrt());
        let a = g.transpose() * &g + (&h - h.transpose()) * 0.5;
        let x_star: Vec<f64> = (0..n).map(|_| uniform(&mut rng, -0.25, 0.25)).collect();
        let Some((balls, _slater)) = plant_balls(&mut rng, &x_star, constraints, active) else {
            continue;
        };
        let jf = constraints as f64;
        let mut f_star = vec![0.0; n];
        for b in &balls {
            // grad f_j(x*) = 2 (x* - c_j)
            for i in 0..n {
                f_star[i] -= b.multiplier / jf * 2.0 * (x_star[i] - b.center[i]);
            }
        }
        let ax = &a * DVector::from_row_slice(&x_star);
        let offset = DVector::from_iterator(n, (0..n).map(|i| f_star[i] - ax[i]));
        let half_width = balls
            .iter()
            .map(|b| b.center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + b.radius)
            .fold(f64::INFINITY, f64::min)
            + 0.1;
        let mapping = AffineMapping::new(a, offset, NoiseModel::Additive { level: noise_level })?;
        let lambda: Vec<f64> = balls.iter().map(|b| b.multiplier).collect();
        let cs: Vec<Arc<dyn Constraint>> = balls
            .into_iter()
            .map(|b| Arc::new(DiagonalQuadratic::ball(b.center, b.radius)) as Arc<dyn Constraint>)
            .collect();
        let instance = ProblemInstance::new(
            Arc::new(mapping),
            cs,
            BaseSet::cube(n, -half_width, half_width),
        )?
        .with_reference(x_star, lambda)?;
        verify_monotone(&instance, seed)?;
        return Ok(instance);
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: "could not plant a Slater-feasible ball arrangement".into(),
    })
}

/// Bilinear saddle problem `min_u max_v u^T (Q + xi) v + a^T u - c^T v`
/// in VI form `F(u, v) = (Q v + a, -Q^T u + c)`.
///
/// The saddle `(u*, v*)` is planted in the interior of per-block ball
/// constraints, so `lambda* = 0`; `Q` is drawn with smallest singular value
/// at least 0.3 when square, which makes the saddle unique.
pub fn make_bilinear_minimax(
    seed: u64,
    n1: usize,
    n2: usize,
    j1: usize,
    j2: usize,
    noise_level: f64,
) -> Result<ProblemInstance> {
    check_dims(&[(n1, "n1"), (n2, "n2"), (j1 + j2, "J1 + J2")])?;
    let n = n1 + n2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let scale = (n1.max(n2) as f64).sqrt();
        let q = DMatrix::from_fn(n1, n2, |_, _| rng.sample::<f64, _>(StandardNormal) / scale);
        if n1 == n2 && q.clone().svd(false, false).singular_values.min() < 0.3 {
            continue;
        }
        let u_star: Vec<f64> = (0..n1).map(|_| uniform(&mut rng, -0.25, 0.25)).collect();
        let v_star: Vec<f64> = (0..n2).map(|_| uniform(&mut rng, -0.25, 0.25)).collect();
        let mut cs: Vec<Arc<dyn Constraint>> = Vec::new();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for (start, star, count) in [(0, &u_star, j1), (n1, &v_star, j2)] {
            let dim = star.len();
            let mut half_width = f64::INFINITY;
            for _ in 0..count {
                let dir = unit_vec(&mut rng, dim);
                let off = uniform(&mut rng, 0.0, 0.5);
                let center: Vec<f64> = star.iter().zip(&dir).map(|(s, d)| s + off * d).collect();
                let radius = off + uniform(&mut rng, 0.5, 1.0);
                half_width = half_width.min(center.iter().fold(0.0f64, |m, c| m.max(c.abs())) + radius);
                cs.push(Arc::new(DiagonalQuadratic::block_ball(n, start, &center, radius)));
            }
            if !half_width.is_finite() {
                half_width = 1.0;
            }
            for i in start..start + dim {
                lower[i] = -(half_width + 0.1);
                upper[i] = half_width + 0.1;
            }
        }
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, n1), (n1, n2)).copy_from(&q);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(-q.transpose()));
        let x_star: Vec<f64> = u_star.iter().chain(&v_star).copied().collect();
        let ax = &a * DVector::from_row_slice(&x_star);
        let offset = -ax;
        let mapping = AffineMapping::new(
            a,
            offset,
            NoiseModel::BilinearBlock {
                level: noise_level,
                n1,
                n2,
            },
        )?;
        let jn = cs.len();
        let instance = ProblemInstance::new(Arc::new(mapping), cs, BaseSet::Box { lower, upper })?
            .with_reference(x_star, vec![0.0; jn])?;
        verify_monotone(&instance, seed)?;
        return Ok(instance);
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: "could not draw a well-conditioned coupling matrix".into(),
    })
}

/// Inverse-demand intercept and slope of the Cournot market.
pub const COURNOT_INTERCEPT: f64 = 10.0;
pub const COURNOT_SLOPE: f64 = 1.0;

pub fn make_nash_cournot(seed: u64, players: usize, caps: Option<Vec<f64>>, noise_level: f64) -> Result<ProblemInstance> {
    make_nash_cournot_with(seed, players, caps, false, noise_level)
}

/// Cournot game with player costs `c_i x_i + q_i x_i^2` and inverse demand
/// `p0 + xi - beta sum_j x_j`.
///
/// The game mapping is `F_i(x) = c_i + 2 q_i x_i - p0 - xi + beta (x_i + sum_j x_j)`.
/// Each player has two constraints on its own output, flattened by
/// [`BlockIndex`]: capacity `x_i - cap_i <= 0` and a convex ramp band
/// `(x_i - cap_i/2)^2 - (cap_i/2 + 1/2)^2 <= 0`. `X` is `prod_i [0, cap_i + 1]`.
/// Default capacities are 1.5 times the unconstrained equilibrium output.
pub fn make_nash_cournot_with(
    seed: u64,
    players: usize,
    caps: Option<Vec<f64>>,
    symmetric: bool,
    noise_level: f64,
) -> Result<ProblemInstance> {
    if players < 2 {
        return Err(Error::InvalidArgument(format!("a game needs >= 2 players, got {players}")));
    }
    if let Some(c) = &caps {
        if c.len() != players || c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "caps must be {players} positive values"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = COURNOT_SLOPE;
    for _ in 0..MAX_ATTEMPTS {
        let mut cost = Vec::with_capacity(players);
        let mut quad = Vec::with_capacity(players);
        for i in 0..players {
            let (c, q) = (uniform(&mut rng, 1.0, 2.0), uniform(&mut rng, 0.5, 1.0));
            if symmetric && i > 0 {
                cost.push(cost[0]);
                quad.push(quad[0]);
            } else {
                cost.push(c);
                quad.push(q);
            }
        }
        let a = DMatrix::from_fn(players, players, |i, j| {
            if i == j {
                2.0 * quad[i] + 2.0 * beta
            } else {
                beta
            }
        });
        let offset = DVector::from_iterator(players, cost.iter().map(|c| c - COURNOT_INTERCEPT));
        let Some(interior) = a.clone().lu().solve(&-&offset) else {
            continue;
        };
        if interior.iter().any(|v| *v <= 0.0) {
            continue;
        }
        let caps = caps
            .clone()
            .unwrap_or_else(|| interior.iter().map(|v| 1.5 * v).collect());
        let index = BlockIndex::new(&vec![2; players]);
        let mut cs: Vec<Arc<dyn Constraint>> = Vec::with_capacity(index.total());
        for (i, cap) in caps.iter().enumerate() {
            let mut e = vec![0.0; players];
            e[i] = 1.0;
            cs.push(Arc::new(DiagonalQuadratic::halfspace(e, *cap)));
            cs.push(Arc::new(DiagonalQuadratic::block_ball(players, i, &[cap / 2.0], cap / 2.0 + 0.5)));
        }
        let lower = vec![0.0; players];
        let upper: Vec<f64> = caps.iter().map(|c| c + 1.0).collect();
        let mapping = AffineMapping::new(
            a,
            offset,
            NoiseModel::AdditiveDirection {
                level: noise_level,
                direction: vec![-1.0; players],
            },
        )?;
        let mut instance = ProblemInstance::new(Arc::new(mapping), cs, BaseSet::Box { lower, upper })?;
        let interior_ok = interior.iter().zip(&caps).all(|(x, c)| x < c);
        if interior_ok {
            instance = instance.with_reference(interior.as_slice().to_vec(), vec![0.0; index.total()])?;
        }
        verify_monotone(&instance, seed)?;
        return Ok(instance);
    }
    Err(Error::Generation {
        attempts: MAX_ATTEMPTS,
        reason: "no positive interior equilibrium".into(),
    })
}

/// `F(y, xi) = y - 2 + xi`, `f(y) = y - 1`, `X = [-3, 3]`; KKT pair `(1, 1)`.
pub fn scalar_reference(noise_level: f64) -> Result<ProblemInstance> {
    let mapping = AffineMapping::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, -2.0),
        NoiseModel::Additive { level: noise_level },
    )?;
    ProblemInstance::new(
        Arc::new(mapping),
        vec![Arc::new(DiagonalQuadratic::halfspace(vec![1.0], 1.0))],
        BaseSet::cube(1, -3.0, 3.0),
    )?
    .with_reference(vec![1.0], vec![1.0])
}

/// `F(x) = -x` on `[-1, 1]^n` with one ball constraint. Fails monotonicity;
/// for diagnostics only.
pub fn make_non_monotone(n: usize) -> Result<ProblemInstance> {
    check_dims(&[(n, "n")])?;
    let mapping = AffineMapping::new(-DMatrix::identity(n, n), DVector::zeros(n), NoiseModel::None)?;
    ProblemInstance::new(
        Arc::new(mapping),
        vec![Arc::new(DiagonalQuadratic::ball(vec![0.0; n], 0.9))],
        BaseSet::cube(n, -1.0, 1.0),
    )
}

/// The small instances used for certification and rate experiments.
pub fn default_zoo() -> Vec<InstanceDescriptor> {
    vec![
        InstanceDescriptor::scalar_reference(0.1),
        InstanceDescriptor::affine_vi(1, 2, 3, 0.1),
        InstanceDescriptor::affine_vi(7, 5, 10, 0.1),
        InstanceDescriptor::bilinear_minimax(3, 2, 2, 1, 1, 0.1),
        InstanceDescriptor::nash_cournot(11, 2, 0.1).with_params(Params {
            symmetric: Some(true),
            ..Default::default()
        }),
        InstanceDescriptor::nash_cournot(5, 3, 0.1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::kkt_residual;
    use crate::problem::evaluate_mapping;

    #[test]
    fn labels() {
        assert_eq!(InstanceDescriptor::affine_vi(7, 5, 10, 0.1).label(), "affine-vi-n5-J10-s7");
        assert_eq!(InstanceDescriptor::bilinear_minimax(3, 2, 2, 1, 1, 0.1).label(), "bilinear-minimax-2x2-J1+1-s3");
        assert_eq!(InstanceDescriptor::nash_cournot(5, 3, 0.1).label(), "nash-cournot-N3-s5");
        let mut bare = InstanceDescriptor::scalar_reference(0.0);
        bare.dims = Dims::default();
        assert_eq!(bare.label(), "scalar-reference-n1-J1-s0");
    }

    #[test]
    fn planted_affine_pair_satisfies_kkt() {
        for seed in 0..5 {
            let inst = make_affine_vi(seed, 4, 6, 0.1).unwrap();
            let r = inst.reference().unwrap();
            let res = kkt_residual(&inst, &r.x, &r.lambda);
            assert!(res.max_violation() < 1e-12, "seed {seed}: {res:?}");
            assert!(r.lambda.iter().filter(|l| **l > 0.0).count() == 2);
        }
    }

    #[test]
    fn zero_noise_ignores_draw() {
        let inst = make_affine_vi(3, 3, 2, 0.0).unwrap();
        let x = [0.1, -0.2, 0.3];
        let a = evaluate_mapping(&inst, &x, &[0.0, 0.0, 0.0]).unwrap();
        let mut noise = vec![0.0; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        inst.mapping().sample_noise(&mut rng, &mut noise);
        assert_eq!(a, evaluate_mapping(&inst, &x, &noise).unwrap());
    }

    #[test]
    fn scalar_reference_pair() {
        let inst = scalar_reference(0.0).unwrap();
        let res = kkt_residual(&inst, &[1.0], &[1.0]);
        assert_eq!(res.max_violation(), 0.0);
    }

    #[test]
    fn bilinear_block_structure() {
        let inst = make_bilinear_minimax(2, 2, 3, 2, 1, 0.1).unwrap();
        let x = [0.3, -0.1, 0.2, 0.4, -0.5];
        for j in 0..2 {
            let g = inst.subgradient(j, &x);
            assert!(g[2..].iter().all(|v| *v == 0.0));
        }
        let g = inst.subgradient(2, &x);
        assert!(g[..2].iter().all(|v| *v == 0.0));
        let r = inst.reference().unwrap();
        assert!(linalg::norm(&inst.mean_mapping(&r.x)) < 1e-12);
    }

    #[test]
    fn cournot_symmetric_interior_equilibrium() {
        let inst = make_nash_cournot_with(4, 2, None, true, 0.0).unwrap();
        let r = inst.reference().expect("interior equilibrium");
        assert!(linalg::norm(&inst.mean_mapping(&r.x)) < 1e-12);
        assert_eq!(r.x[0], r.x[1]);
        assert_eq!(inst.num_constraints(), 4);
    }

    #[test]
    fn cournot_tight_caps_drop_reference() {
        let inst = make_nash_cournot_with(4, 2, Some(vec![0.5, 0.5]), true, 0.0).unwrap();
        assert!(inst.reference().is_none());
        assert!(make_nash_cournot(1, 1, None, 0.0).is_err());
        assert!(make_nash_cournot(1, 2, Some(vec![1.0]), 0.0).is_err());
    }

    #[test]
    fn block_index_roundtrip() {
        let idx = BlockIndex::new(&[2, 0, 3, 1]);
        assert_eq!(idx.total(), 6);
        let mut seen = vec![false; 6];
        for (i, count) in [2, 0, 3, 1].iter().enumerate() {
            for l in 0..*count {
                let j = idx.flatten(i, l).unwrap();
                assert!(!seen[j]);
                seen[j] = true;
                assert_eq!(idx.unflatten(j), Some((i, l)));
            }
            assert_eq!(idx.flatten(i, *count), None);
        }
        assert!(seen.iter().all(|s| *s));
        assert_eq!(idx.unflatten(6), None);
    }

    #[test]
    fn descriptor_json_roundtrip() {
        for d in default_zoo() {
            let s = serde_json::to_string(&d).unwrap();
            let back: InstanceDescriptor = serde_json::from_str(&s).unwrap();
            assert_eq!(back, d);
        }
        let d = InstanceDescriptor::affine_vi(7, 5, 10, 0.1);
        let v: serde_json::Value = serde_json::to_value(&d).unwrap();
        assert_eq!(v["family"], "affine-vi");
        assert_eq!(v["dims"]["J"], 10);
    }

    #[test]
    fn bad_dims_rejected() {
        assert!(make_affine_vi(0, 0, 3, 0.1).is_err());
        assert!(make_affine_vi(0, 3, 0, 0.1).is_err());
        let d = InstanceDescriptor {
            dims: Dims::default(),
            ..InstanceDescriptor::affine_vi(0, 1, 1, 0.0)
        };
        assert!(d.build().is_err());
    }
}
