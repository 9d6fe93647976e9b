//! Target and proposal densities.
//!
//! Every density is evaluated in log space. A zero density is represented by
//! `f64::NEG_INFINITY`, which compares below every finite log value.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A state of the chain, a point of ℝ^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &[f64]) -> f64 {
        squared_distance(&self.0, other).sqrt()
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point(coords)
    }
}

impl<const D: usize> From<[f64; D]> for Point {
    fn from(coords: [f64; D]) -> Self {
        Point(coords.to_vec())
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `ln Σ exp(v)`, exact for empty input (−∞) and for all-−∞ input.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// `ln((1/n) Σ exp(v))`.
pub fn log_mean_exp(values: &[f64]) -> f64 {
    log_sum_exp(values) - (values.len() as f64).ln()
}

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Unnormalized target density π, given through its logarithm.
#[derive(Clone)]
pub struct TargetDensity {
    dim: usize,
    log_density: Arc<LogDensityFn>,
    known_normalizer: Option<f64>,
}

impl TargetDensity {
    pub fn new<F>(dim: usize, log_density: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        TargetDensity {
            dim,
            log_density: Arc::new(log_density),
            known_normalizer: None,
        }
    }

    /// Records Z = ∫ π when it is known, e.g. for normalized test targets.
    pub fn with_normalizer(mut self, normalizer: f64) -> Self {
        self.known_normalizer = Some(normalizer);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn known_normalizer(&self) -> Option<f64> {
        self.known_normalizer
    }

    /// `ln π(x)`. Fails on a dimension mismatch or when the wrapped function
    /// returns NaN or +∞.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let value = (self.log_density)(x);
        if value.is_nan() || value == f64::INFINITY {
            return Err(Error::Invariant(format!(
                "target log-density returned {value} at {x:?}"
            )));
        }
        Ok(value)
    }

    /// The target `ln π + shift`; the normalizer scales accordingly.
    pub fn shifted(&self, shift: f64) -> Self {
        let inner = Arc::clone(&self.log_density);
        TargetDensity {
            dim: self.dim,
            log_density: Arc::new(move |x| inner(x) + shift),
            known_normalizer: self.known_normalizer.map(|z| z * shift.exp()),
        }
    }
}

impl fmt::Debug for TargetDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetDensity")
            .field("dim", &self.dim)
            .field("known_normalizer", &self.known_normalizer)
            .finish_non_exhaustive()
    }
}

/// Zero-mean multivariate normal shape with a precomputed Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    dim: usize,
    /// Lower-triangular factor L with C = L Lᵀ, row-major.
    chol: Vec<f64>,
    /// `-(d/2) ln 2π - ln det L`
    log_norm: f64,
}

impl Gaussian {
    /// Builds the shape from a full symmetric positive-definite covariance.
    pub fn new(covariance: &[Vec<f64>]) -> Result<Self> {
        let dim = covariance.len();
        if dim == 0 {
            return Err(Error::Config("covariance must be at least 1x1".into()));
        }
        if let Some(row) = covariance.iter().find(|row| row.len() != dim) {
            return Err(Error::Config(format!(
                "covariance must be square: row of length {} in a {dim}x{dim} matrix",
                row.len()
            )));
        }
        let scale = covariance
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (covariance[i][j], covariance[j][i]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * scale {
                    return Err(Error::Config(format!(
                        "covariance is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
            }
        }
        let matrix = DMatrix::from_fn(dim, dim, |i, j| covariance[i][j]);
        let chol = matrix.cholesky().ok_or_else(|| {
            Error::Config("covariance is not positive definite".into())
        })?;
        let l = chol.l();
        let mut factor = vec![0.0; dim * dim];
        let mut log_det_l = 0.0;
        for i in 0..dim {
            for j in 0..=i {
                factor[i * dim + j] = l[(i, j)];
            }
            log_det_l += l[(i, i)].ln();
        }
        if !log_det_l.is_finite() {
            return Err(Error::Config("covariance is numerically singular".into()));
        }
        Ok(Gaussian {
            dim,
            chol: factor,
            log_norm: -0.5 * dim as f64 * LN_2PI - log_det_l,
        })
    }

    /// σ² I in `dim` dimensions.
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config(format!("scale must be positive, got {sigma}")));
        }
        Self::diagonal(&vec![sigma * sigma; dim])
    }

    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let dim = variances.len();
        let cov: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut row = vec![0.0; dim];
                row[i] = variances[i];
                row
            })
            .collect();
        Self::new(&cov)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Log-density of the offset `delta = z - mean`.
    pub fn log_density_offset(&self, delta: &[f64]) -> f64 {
        let d = self.dim;
        let mut stack = [0.0_f64; 8];
        let mut heap;
        let solved: &mut [f64] = if d <= stack.len() {
            &mut stack[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        // Forward substitution L u = delta, then the quadratic form is |u|².
        let mut quad = 0.0;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let partial: f64 = row.iter().zip(solved.iter()).map(|(l, u)| l * u).sum();
            let u = (delta[i] - partial) / self.chol[i * d + i];
            solved[i] = u;
            quad += u * u;
        }
        self.log_norm - 0.5 * quad
    }

    /// Draws an offset `L ε` with ε standard normal.
    pub fn sample_offset(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        let d = self.dim;
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| {
                self.chol[i * d..i * d + i + 1]
                    .iter()
                    .zip(&eps)
                    .map(|(l, e)| l * e)
                    .sum()
            })
            .collect()
    }
}

/// `ln 𝒩(z; mean, covariance)`.
pub fn gaussian_log_density(z: &[f64], mean: &[f64], covariance: &[Vec<f64>]) -> Result<f64> {
    let shape = Gaussian::new(covariance)?;
    check_dim(shape.dim, z.len())?;
    check_dim(shape.dim, mean.len())?;
    let delta: Vec<f64> = z.iter().zip(mean).map(|(a, b)| a - b).collect();
    Ok(shape.log_density_offset(&delta))
}

/// Sampling and log-density hooks for a proposal q.
///
/// Conditional proposals q(·|c) need the conditioning state; independent
/// proposals ignore it. The samplers are written against this trait so that
/// the discrete test embedding in [`crate::oracle`] runs the same code path as
/// the Gaussian proposals.
pub trait Proposal: Send + Sync {
    fn dim(&self) -> usize;

    /// True when the density depends on the conditioning state.
    fn is_conditional(&self) -> bool;

    fn sample(&self, condition: Option<&[f64]>, rng: &mut dyn RngCore) -> Result<Point>;

    fn log_density(&self, z: &[f64], condition: Option<&[f64]>) -> Result<f64>;
}

impl<P: Proposal + ?Sized> Proposal for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn is_conditional(&self) -> bool {
        (**self).is_conditional()
    }

    fn sample(&self, condition: Option<&[f64]>, rng: &mut dyn RngCore) -> Result<Point> {
        (**self).sample(condition, rng)
    }

    fn log_density(&self, z: &[f64], condition: Option<&[f64]>) -> Result<f64> {
        (**self).log_density(z, condition)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalKind {
    RandomWalk,
    Independent,
    MixtureOfIndependents,
}

/// Gaussian proposal families.
#[derive(Clone, Debug, PartialEq)]
pub enum ProposalDensity {
    /// q(z|x) = 𝒩(z; x, C).
    RandomWalk(Gaussian),
    /// q(z) = 𝒩(z; mean, C).
    Independent { mean: Point, shape: Gaussian },
    /// ψ(z) = (1/N) Σ qₙ(z) over independent components.
    Mixture(Vec<ProposalDensity>),
}

impl ProposalDensity {
    pub fn random_walk(covariance: &[Vec<f64>]) -> Result<Self> {
        Ok(ProposalDensity::RandomWalk(Gaussian::new(covariance)?))
    }

    pub fn random_walk_isotropic(dim: usize, sigma: f64) -> Result<Self> {
        Ok(ProposalDensity::RandomWalk(Gaussian::isotropic(dim, sigma)?))
    }

    pub fn independent(mean: impl Into<Point>, covariance: &[Vec<f64>]) -> Result<Self> {
        let mean = mean.into();
        let shape = Gaussian::new(covariance)?;
        check_dim(shape.dim, mean.dim())?;
        Ok(ProposalDensity::Independent { mean, shape })
    }

    pub fn independent_isotropic(mean: impl Into<Point>, sigma: f64) -> Result<Self> {
        let mean = mean.into();
        let shape = Gaussian::isotropic(mean.dim(), sigma)?;
        Ok(ProposalDensity::Independent { mean, shape })
    }

    /// Equal-weight mixture of independent components.
    pub fn mixture(components: Vec<ProposalDensity>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::Config("a mixture needs at least one component".into()))?;
        let dim = first.dim();
        for c in &components {
            check_dim(dim, c.dim())?;
            if c.kind() != ProposalKind::Independent {
                return Err(Error::Config(
                    "mixture components must be independent proposals".into(),
                ));
            }
        }
        Ok(ProposalDensity::Mixture(components))
    }

    pub fn kind(&self) -> ProposalKind {
        match self {
            ProposalDensity::RandomWalk(_) => ProposalKind::RandomWalk,
            ProposalDensity::Independent { .. } => ProposalKind::Independent,
            ProposalDensity::Mixture(_) => ProposalKind::MixtureOfIndependents,
        }
    }
}

impl Proposal for ProposalDensity {
    fn dim(&self) -> usize {
        match self {
            ProposalDensity::RandomWalk(shape) => shape.dim,
            ProposalDensity::Independent { shape, .. } => shape.dim,
            ProposalDensity::Mixture(components) => components[0].dim(),
        }
    }

    fn is_conditional(&self) -> bool {
        matches!(self, ProposalDensity::RandomWalk(_))
    }

    fn sample(&self, condition: Option<&[f64]>, rng: &mut dyn RngCore) -> Result<Point> {
        match self {
            ProposalDensity::RandomWalk(shape) => {
                let center = condition.ok_or_else(|| {
                    Error::Usage("a random-walk proposal needs a conditioning state".into())
                })?;
                check_dim(shape.dim, center.len())?;
                let offset = shape.sample_offset(rng);
                Ok(Point(center.iter().zip(offset).map(|(c, o)| c + o).collect()))
            }
            ProposalDensity::Independent { mean, shape } => {
                let offset = shape.sample_offset(rng);
                Ok(Point(mean.iter().zip(offset).map(|(m, o)| m + o).collect()))
            }
            ProposalDensity::Mixture(components) => {
                let k = rng.random_range(0..components.len());
                components[k].sample(None, rng)
            }
        }
    }

    fn log_density(&self, z: &[f64], condition: Option<&[f64]>) -> Result<f64> {
        check_dim(self.dim(), z.len())?;
        match self {
            ProposalDensity::RandomWalk(shape) => {
                let center = condition.ok_or_else(|| {
                    Error::Usage("a random-walk proposal needs a conditioning state".into())
                })?;
                check_dim(shape.dim, center.len())?;
                let delta: Vec<f64> = z.iter().zip(center).map(|(a, b)| a - b).collect();
                Ok(shape.log_density_offset(&delta))
            }
            ProposalDensity::Independent { mean, shape } => {
                let delta: Vec<f64> = z.iter().zip(mean.iter()).map(|(a, b)| a - b).collect();
                Ok(shape.log_density_offset(&delta))
            }
            ProposalDensity::Mixture(components) => mixture_log_density(z, components),
        }
    }
}

/// One draw from `proposal`, conditioned on `condition` for random-walk kinds.
pub fn sample_proposal<P: Proposal + ?Sized>(
    proposal: &P,
    condition: Option<&[f64]>,
    rng: &mut dyn RngCore,
) -> Result<Point> {
    proposal.sample(condition, rng)
}

/// `ln((1/N) Σₙ qₙ(z))` over independent components, via log-sum-exp.
pub fn mixture_log_density<P: Proposal>(z: &[f64], components: &[P]) -> Result<f64> {
    if components.is_empty() {
        return Err(Error::Config("a mixture needs at least one component".into()));
    }
    let logs = components
        .iter()
        .map(|c| c.log_density(z, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(log_mean_exp(&logs))
}
