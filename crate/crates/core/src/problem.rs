//! Problem abstraction: stochastic mapping oracles, functional constraints,
//! the easily-projectable base set, and constant/monotonicity diagnostics.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Base set `X`: a box or a Euclidean ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl BaseSet {
    pub fn cube(n: usize, lo: f64, hi: f64) -> Self {
        BaseSet::Box {
            lower: vec![lo; n],
            upper: vec![hi; n],
        }
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        BaseSet::Ball { center, radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            BaseSet::Box { lower, .. } => lower.len(),
            BaseSet::Ball { center, .. } => center.len(),
        }
    }

    /// Checks nonemptiness, boundedness and dimensional consistency.
    pub fn validate(&self) -> Result<()> {
        match self {
            BaseSet::Box { lower, upper } => {
                if lower.len() != upper.len() || lower.is_empty() {
                    return Err(Error::InvalidInstance(format!(
                        "box bounds have lengths {} and {}",
                        lower.len(),
                        upper.len()
                    )));
                }
                for (i, (lo, hi)) in lower.iter().zip(upper).enumerate() {
                    if !lo.is_finite() || !hi.is_finite() {
                        return Err(Error::InvalidInstance(format!(
                            "box bound at coordinate {i} is not finite"
                        )));
                    }
                    if lo > hi {
                        return Err(Error::InvalidInstance(format!(
                            "box is empty at coordinate {i}: {lo} > {hi}"
                        )));
                    }
                }
                Ok(())
            }
            BaseSet::Ball { center, radius } => {
                if center.is_empty() {
                    return Err(Error::InvalidInstance("ball has dimension 0".into()));
                }
                if center.iter().any(|c| !c.is_finite()) || !radius.is_finite() || *radius < 0.0 {
                    return Err(Error::InvalidInstance(format!(
                        "ball must have a finite center and radius >= 0, got radius {radius}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Euclidean projection, written into `out`.
    pub fn project_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            BaseSet::Box { lower, upper } => {
                for i in 0..y.len() {
                    out[i] = y[i].clamp(lower[i], upper[i]);
                }
            }
            BaseSet::Ball { center, radius } => {
                let d = linalg::dist(y, center);
                if d <= *radius {
                    out.copy_from_slice(y);
                } else {
                    let s = radius / d;
                    for i in 0..y.len() {
                        out[i] = center[i] + s * (y[i] - center[i]);
                    }
                }
            }
        }
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.project_into(y, &mut out);
        out
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            BaseSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol),
            BaseSet::Ball { center, radius } => linalg::dist(x, center) <= radius + tol,
        }
    }

    /// Uniform sample: per-coordinate uniform for a box, normalized Gaussian
    /// times `radius * u^(1/n)` for a ball.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            BaseSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
                .collect(),
            BaseSet::Ball { center, radius } => {
                let n = center.len();
                let mut g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                let gn = linalg::norm(&g).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
                for (gi, ci) in g.iter_mut().zip(center) {
                    *gi = ci + r * *gi / gn;
                }
                g
            }
        }
    }

    /// Exact `sup_{x in X} ||x||`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            BaseSet::Box { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(lo, hi)| lo.abs().max(hi.abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            BaseSet::Ball { center, radius } => linalg::norm(center) + radius,
        }
    }
}

/// Stochastic mapping oracle `F(x, xi)` together with its mean `F(x)`.
///
/// Implementations must be pure: the same `(x, noise)` always yields the
/// same output bits.
pub trait StochasticMapping: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Number of scalars in one noise realization.
    fn noise_len(&self) -> usize;

    fn sample_noise(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    fn eval(&self, x: &[f64], noise: &[f64], out: &mut [f64]);

    fn mean(&self, x: &[f64], out: &mut [f64]);

    /// `(A, b)` when the mean mapping is `F(x) = A x + b`.
    fn affine_parts(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        None
    }
}

/// Zero-mean bounded noise models for [`AffineMapping`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    None,
    /// `F(x) + xi`, `xi ~ U[-level, level]^n`.
    Additive { level: f64 },
    /// `F(x) + xi * direction`, scalar `xi ~ U[-level, level]`.
    AdditiveDirection { level: f64, direction: Vec<f64> },
    /// `(A + xi * S) x + b`, scalar `xi ~ U[-level, level]`.
    Multiplicative { level: f64, shift: Vec<f64> },
    /// Bilinear saddle noise: the coupling block `Q` of
    /// `[[0, Q], [-Q^T, 0]]` is perturbed by an `n1 x n2` matrix with
    /// entries `U[-level, level]` (row-major).
    BilinearBlock { level: f64, n1: usize, n2: usize },
}

impl NoiseModel {
    fn len(&self, n: usize) -> usize {
        match self {
            NoiseModel::None => 0,
            NoiseModel::Additive { .. } => n,
            NoiseModel::AdditiveDirection { .. } | NoiseModel::Multiplicative { .. } => 1,
            NoiseModel::BilinearBlock { n1, n2, .. } => n1 * n2,
        }
    }

    fn level(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::Additive { level }
            | NoiseModel::AdditiveDirection { level, .. }
            | NoiseModel::Multiplicative { level, .. }
            | NoiseModel::BilinearBlock { level, .. } => *level,
        }
    }
}

/// `F(x, xi) = A x + b + noise`, with an exact mean mapping.
#[derive(Debug, Clone)]
pub struct AffineMapping {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
    noise: NoiseModel,
    /// `S` for the multiplicative model, stored as a matrix.
    shift: Option<DMatrix<f64>>,
}

impl AffineMapping {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>, noise: NoiseModel) -> Result<Self> {
        let n = offset.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidInstance(format!(
                "mapping matrix is {}x{} but offset has length {n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let level = noise.level();
        if !level.is_finite() || level < 0.0 {
            return Err(Error::InvalidInstance(format!(
                "noise level must be finite and >= 0, got {level}"
            )));
        }
        let shift = match &noise {
            NoiseModel::AdditiveDirection { direction, .. } if direction.len() != n => {
                return Err(Error::InvalidInstance("noise direction has wrong length".into()))
            }
            NoiseModel::Multiplicative { shift, .. } => {
                if shift.len() != n * n {
                    return Err(Error::InvalidInstance("noise shift matrix has wrong size".into()));
                }
                Some(DMatrix::from_row_slice(n, n, shift))
            }
            NoiseModel::BilinearBlock { n1, n2, .. } if n1 + n2 != n => {
                return Err(Error::InvalidInstance("bilinear noise blocks do not sum to n".into()))
            }
            _ => None,
        };
        Ok(Self {
            matrix,
            offset,
            noise,
            shift,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }
}

impl StochasticMapping for AffineMapping {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn noise_len(&self) -> usize {
        self.noise.len(self.dim())
    }

    fn sample_noise(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        let level = self.noise.level();
        for v in out.iter_mut() {
            *v = level * (2.0 * rng.random::<f64>() - 1.0);
        }
    }

    fn eval(&self, x: &[f64], noise: &[f64], out: &mut [f64]) {
        self.mean(x, out);
        match &self.noise {
            NoiseModel::None => {}
            NoiseModel::Additive { .. } => linalg::axpy(1.0, noise, out),
            NoiseModel::AdditiveDirection { direction, .. } => {
                linalg::axpy(noise[0], direction, out)
            }
            NoiseModel::Multiplicative { .. } => {
                let s = self.shift.as_ref().expect("shift matrix present");
                let n = x.len();
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += s[(i, j)] * x[j];
                    }
                    out[i] += noise[0] * acc;
                }
            }
            NoiseModel::BilinearBlock { n1, n2, .. } => {
                let (u, v) = x.split_at(*n1);
                for i in 0..*n1 {
                    for j in 0..*n2 {
                        let e = noise[i * n2 + j];
                        out[i] += e * v[j];
                        out[n1 + j] -= e * u[i];
                    }
                }
            }
        }
    }

    fn mean(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let mut acc = self.offset[i];
            for j in 0..n {
                acc += self.matrix[(i, j)] * x[j];
            }
            out[i] = acc;
        }
    }

    fn affine_parts(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        Some((&self.matrix, &self.offset))
    }
}

/// A convex functional constraint `f(x) <= 0` with a deterministic
/// subgradient selection and an exact projection onto its sublevel set.
pub trait Constraint: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn subgradient(&self, x: &[f64], out: &mut [f64]);
    /// Euclidean projection onto `{x : f(x) <= 0}`.
    fn project_sublevel(&self, y: &[f64], out: &mut [f64]);
}

/// Separable convex quadratic `sum_i w_i (x_i - c_i)^2 + a^T x - r` with
/// `w_i >= 0`. Covers balls, block balls, halfspaces and scalar bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalQuadratic {
    pub weights: Vec<f64>,
    pub center: Vec<f64>,
    pub linear: Vec<f64>,
    pub offset: f64,
}

impl DiagonalQuadratic {
    /// `||x - c||^2 - r^2`
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let n = center.len();
        Self {
            weights: vec![1.0; n],
            center,
            linear: vec![0.0; n],
            offset: radius * radius,
        }
    }

    /// Ball over coordinates `start..start+center.len()` of an `n`-vector.
    pub fn block_ball(n: usize, start: usize, center: &[f64], radius: f64) -> Self {
        let mut weights = vec![0.0; n];
        let mut c = vec![0.0; n];
        for (k, ck) in center.iter().enumerate() {
            weights[start + k] = 1.0;
            c[start + k] = *ck;
        }
        Self {
            weights,
            center: c,
            linear: vec![0.0; n],
            offset: radius * radius,
        }
    }

    /// `a^T x - b`
    pub fn halfspace(a: Vec<f64>, b: f64) -> Self {
        let n = a.len();
        Self {
            weights: vec![0.0; n],
            center: vec![0.0; n],
            linear: a,
            offset: b,
        }
    }

    fn point_for_multiplier(&self, y: &[f64], mu: f64, out: &mut [f64]) {
        for i in 0..y.len() {
            let w = self.weights[i];
            out[i] = (y[i] + mu * (2.0 * w * self.center[i] - self.linear[i])) / (1.0 + 2.0 * mu * w);
        }
    }

    fn is_plain_ball(&self) -> bool {
        self.linear.iter().all(|a| *a == 0.0) && self.weights.iter().all(|w| *w == 1.0)
    }
}

impl Constraint for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut acc = -self.offset;
        for i in 0..x.len() {
            let d = x[i] - self.center[i];
            acc += self.weights[i] * d * d + self.linear[i] * x[i];
        }
        acc
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            out[i] = 2.0 * self.weights[i] * (x[i] - self.center[i]) + self.linear[i];
        }
    }

    fn project_sublevel(&self, y: &[f64], out: &mut [f64]) {
        let fy = self.value(y);
        if fy <= 0.0 {
            out.copy_from_slice(y);
            return;
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            let a2 = linalg::norm_sq(&self.linear);
            for i in 0..y.len() {
                out[i] = y[i] - fy / a2 * self.linear[i];
            }
            return;
        }
        if self.is_plain_ball() && self.offset >= 0.0 {
            let r = self.offset.sqrt();
            let d = linalg::dist(y, &self.center);
            for i in 0..y.len() {
                out[i] = self.center[i] + r / d * (y[i] - self.center[i]);
            }
            return;
        }
        // x(mu) minimizes ||x - y||^2 / 2 + mu f(x); f(x(mu)) is
        // nonincreasing in mu, so bisect on the multiplier.
        let mut hi = 1.0;
        for _ in 0..200 {
            self.point_for_multiplier(y, hi, out);
            if self.value(out) <= 0.0 {
                break;
            }
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            self.point_for_multiplier(y, mid, out);
            if self.value(out) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.point_for_multiplier(y, hi, out);
    }
}

/// `max_i |x_i - c_i| - r`. The subgradient selects the lowest-index
/// coordinate attaining the maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfNormBall {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Constraint for InfNormBall {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(xi, ci)| (xi - ci).abs())
            .fold(0.0, f64::max)
            - self.radius
    }

    fn subgradient(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut best = 0.0;
        let mut arg = None;
        for (i, (xi, ci)) in x.iter().zip(&self.center).enumerate() {
            let d = (xi - ci).abs();
            if d > best {
                best = d;
                arg = Some(i);
            }
        }
        if let Some(i) = arg {
            out[i] = (x[i] - self.center[i]).signum();
        }
    }

    fn project_sublevel(&self, y: &[f64], out: &mut [f64]) {
        for i in 0..y.len() {
            out[i] = y[i].clamp(self.center[i] - self.radius, self.center[i] + self.radius);
        }
    }
}

/// A known KKT pair `(x*, lambda*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
}

/// A constrained stochastic VI: mapping, `J` constraints and the base set.
///
/// Immutable after construction; clones share the oracles.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    mapping: Arc<dyn StochasticMapping>,
    constraints: Vec<Arc<dyn Constraint>>,
    base: BaseSet,
    reference: Option<ReferenceSolution>,
}

impl ProblemInstance {
    pub fn new(
        mapping: Arc<dyn StochasticMapping>,
        constraints: Vec<Arc<dyn Constraint>>,
        base: BaseSet,
    ) -> Result<Self> {
        base.validate()?;
        let n = mapping.dim();
        if n == 0 {
            return Err(Error::InvalidInstance("dimension must be >= 1".into()));
        }
        if base.dim() != n {
            return Err(Error::InvalidInstance(format!(
                "base set has dimension {} but mapping has dimension {n}",
                base.dim()
            )));
        }
        if constraints.is_empty() {
            return Err(Error::InvalidInstance("at least one constraint is required".into()));
        }
        if let Some(j) = constraints.iter().position(|c| c.dim() != n) {
            return Err(Error::InvalidInstance(format!(
                "constraint {j} has dimension {}, expected {n}",
                constraints[j].dim()
            )));
        }
        let instance = Self {
            mapping,
            constraints,
            base,
            reference: None,
        };
        instance.check_finite_on_base()?;
        Ok(instance)
    }

    fn check_finite_on_base(&self) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f00d);
        let mut g = vec![0.0; self.dim()];
        for _ in 0..64 {
            let x = self.base.sample_uniform(&mut rng);
            for (j, c) in self.constraints.iter().enumerate() {
                c.subgradient(&x, &mut g);
                if !c.value(&x).is_finite() || linalg::first_non_finite(&g).is_some() {
                    return Err(Error::InvalidInstance(format!(
                        "constraint {j} is not finite on the base set"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_reference(mut self, x: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if x.len() != self.dim() || lambda.len() != self.num_constraints() {
            return Err(Error::InvalidInstance("reference solution has wrong shape".into()));
        }
        self.reference = Some(ReferenceSolution { x, lambda });
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.mapping.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn mapping(&self) -> &dyn StochasticMapping {
        self.mapping.as_ref()
    }

    pub fn constraint(&self, j: usize) -> &dyn Constraint {
        self.constraints[j].as_ref()
    }

    pub fn constraints(&self) -> impl Iterator<Item = &dyn Constraint> {
        self.constraints.iter().map(|c| c.as_ref())
    }

    pub fn base(&self) -> &BaseSet {
        &self.base
    }

    pub fn reference(&self) -> Option<&ReferenceSolution> {
        self.reference.as_ref()
    }

    pub fn affine_parts(&self) -> Option<(&DMatrix<f64>, &DVector<f64>)> {
        self.mapping.affine_parts()
    }

    /// `(f_1(x), ..., f_J(x))`
    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.value(x)).collect()
    }

    pub fn mean_mapping(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.mapping.mean(x, &mut out);
        out
    }

    pub fn subgradient(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.constraints[j].subgradient(x, &mut out);
        out
    }

    /// Membership in `X ∩ {f_j <= tol}`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.base.contains(x, tol) && self.constraints.iter().all(|c| c.value(x) <= tol)
    }
}

/// Evaluates `F(x, noise)`; non-finite output is reported by coordinate.
pub fn evaluate_mapping(instance: &ProblemInstance, x: &[f64], noise: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; x.len()];
    instance.mapping.eval(x, noise, &mut out);
    match linalg::first_non_finite(&out) {
        Some(coordinate) => Err(Error::OracleEvaluation {
            coordinate,
            iteration: None,
        }),
        None => Ok(out),
    }
}

/// Exact Euclidean projection onto the base set.
pub fn project_base(instance: &ProblemInstance, y: &[f64]) -> Vec<f64> {
    instance.base.project(y)
}

/// A nonnegative empirical bound and the number of samples behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub samples: usize,
}

/// Empirical versions of the problem constants, inflated by a safety factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimates {
    /// sup ||F(x)|| over X
    pub c_mapping: Estimate,
    /// sup ||subgradient of f_j|| over X and j
    pub c_subgrad: Estimate,
    /// max_j sup |f_j(x)| over X
    pub d_constraint: Estimate,
    /// sup ||x|| over X
    pub d_base: Estimate,
    /// sup E||F(x, xi) - F(x)||^2
    pub noise_sq: Estimate,
    pub safety_factor: f64,
}

pub const DEFAULT_SAFETY_FACTOR: f64 = 1.25;

/// Noise draws per sampled point when estimating the noise second moment.
pub const NOISE_DRAWS_PER_POINT: usize = 16;

/// Samples the base set and returns inflated empirical maxima.
///
/// Points and their noise draws are consumed from `rng` in a fixed order,
/// so a larger budget on the same seed sees a superset of samples.
pub fn estimate_bounds<R: RngCore>(
    instance: &ProblemInstance,
    sample_budget: usize,
    safety_factor: f64,
    rng: &mut R,
) -> Result<BoundEstimates> {
    if sample_budget == 0 {
        return Err(Error::InvalidArgument("sample_budget must be >= 1".into()));
    }
    if !(safety_factor.is_finite() && safety_factor >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety factor must be >= 1, got {safety_factor}"
        )));
    }
    let n = instance.dim();
    let mapping = instance.mapping();
    let mut fx = vec![0.0; n];
    let mut fxi = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut noise = vec![0.0; mapping.noise_len()];
    let (mut cf_map, mut cf_sub, mut d_f, mut d_x, mut nu2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..sample_budget {
        let x = instance.base.sample_uniform(rng);
        d_x = d_x.max(linalg::norm(&x));
        mapping.mean(&x, &mut fx);
        cf_map = cf_map.max(linalg::norm(&fx));
        for c in instance.constraints() {
            d_f = d_f.max(c.value(&x).abs());
            c.subgradient(&x, &mut g);
            cf_sub = cf_sub.max(linalg::norm(&g));
        }
        let mut second = 0.0;
        for _ in 0..NOISE_DRAWS_PER_POINT {
            mapping.sample_noise(rng, &mut noise);
            mapping.eval(&x, &noise, &mut fxi);
            second += fxi.iter().zip(&fx).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        nu2 = nu2.max(second / NOISE_DRAWS_PER_POINT as f64);
    }
    let est = |v: f64, samples| Estimate {
        value: v * safety_factor,
        samples,
    };
    Ok(BoundEstimates {
        c_mapping: est(cf_map, sample_budget),
        c_subgrad: est(cf_sub, sample_budget),
        d_constraint: est(d_f, sample_budget),
        d_base: est(d_x, sample_budget),
        noise_sq: est(nu2, sample_budget * NOISE_DRAWS_PER_POINT),
        safety_factor,
    })
}

/// Outcome of a sampled monotonicity check.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub pairs: usize,
    /// Smallest observed `<F(x) - F(y), x - y>`.
    pub min_inner: f64,
    /// The pair attaining `min_inner`.
    pub witness: (Vec<f64>, Vec<f64>),
    pub passed: bool,
}

/// Samples pairs from `X` and checks `<F(x) - F(y), x - y> >= -tol` on the
/// mean mapping.
pub fn check_monotonicity<R: RngCore>(
    instance: &ProblemInstance,
    pair_budget: usize,
    tol: f64,
    rng: &mut R,
) -> Result<MonotonicityReport> {
    if pair_budget == 0 {
        return Err(Error::InvalidArgument("pair_budget must be >= 1".into()));
    }
    let n = instance.dim();
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    let mut min_inner = f64::INFINITY;
    let mut witness = (Vec::new(), Vec::new());
    for _ in 0..pair_budget {
        let x = instance.base.sample_uniform(rng);
        let y = instance.base.sample_uniform(rng);
        instance.mapping.mean(&x, &mut fx);
        instance.mapping.mean(&y, &mut fy);
        let inner: f64 = (0..n).map(|i| (fx[i] - fy[i]) * (x[i] - y[i])).sum();
        if inner < min_inner {
            min_inner = inner;
            witness = (x, y);
        }
    }
    Ok(MonotonicityReport {
        pairs: pair_budget,
        min_inner,
        witness,
        passed: min_inner >= -tol,
    })
}

/// Best point found while searching for a strictly feasible point.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterReport {
    pub point: Vec<f64>,
    /// `max_j f_j(point)`; strictly negative means Slater holds.
    pub max_value: f64,
    pub iterations: usize,
    pub passed: bool,
}

/// Projected subgradient descent on `max_j f_j` over `X`, started at the
/// reference solution when known and at the projection of the origin
/// otherwise.
pub fn find_slater_point(instance: &ProblemInstance, budget: usize) -> SlaterReport {
    let n = instance.dim();
    let mut x = match instance.reference() {
        Some(r) => instance.base.project(&r.x),
        None => instance.base.project(&vec![0.0; n]),
    };
    let worst = |x: &[f64]| {
        instance
            .constraints()
            .enumerate()
            .map(|(j, c)| (j, c.value(x)))
            .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    };
    let radius = instance.base.sup_norm().max(1.0);
    let mut best = (x.clone(), worst(&x).1);
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    for t in 0..budget {
        iterations = t + 1;
        let (j, _) = worst(&x);
        instance.constraint(j).subgradient(&x, &mut g);
        let gn = linalg::norm(&g);
        if gn == 0.0 {
            break;
        }
        let step = radius / (gn * ((t + 2) as f64).sqrt());
        linalg::axpy(-step, &g, &mut x);
        x = instance.base.project(&x);
        let v = worst(&x).1;
        if v < best.1 {
            best = (x.clone(), v);
        }
    }
    SlaterReport {
        passed: best.1 < 0.0,
        max_value: best.1,
        point: best.0,
        iterations,
    }
}
