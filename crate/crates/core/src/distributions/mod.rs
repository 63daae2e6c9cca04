//! Mixture schemes, the laws built from them, and exact finite-support
//! oracles.
//!
//! Every law is assembled from finite-support pieces, compound Poisson laws
//! with finite jump laws, Gaussian components and point shifts. Sampling is
//! driven by an explicit [`RngStream`], so equal streams give equal draws.

mod exact;
mod finite;
mod laws;
mod scheme;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use thiserror::Error;

use crate::rng::RngStream;

pub use exact::{
    combine_compound_poisson, exact_pmf, exact_pmf_with_cap, poisson_pmf, poisson_truncation,
    poisson_upper_tail, DEFAULT_ATOM_CAP,
};
pub use finite::{FiniteLaw, MASS_TOL};
pub use laws::{CompoundPoissonLaw, Component, ConvolutionLaw, GaussianLaw, EIGEN_FLOOR, SYMMETRY_TOL};
pub use scheme::{
    accompany, build_dstar, build_dstarstar, gaussian_match, sample_scheme, validate_scheme,
    MixtureFactor, Scheme, D0_MOMENT_TOL, MEAN_TOL,
};

pub(crate) use finite::lex_cmp;

#[derive(Debug, Error)]
pub enum DistributionError {
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("factor {factor}: p = {p} is outside [0, 1]")]
    WeightViolation { factor: usize, p: f64 },
    #[error("factor {factor}: U atom {atom} has norm {norm} > tau = {tau}")]
    SupportViolation {
        factor: usize,
        atom: usize,
        norm: f64,
        tau: f64,
    },
    #[error("factor {factor}: U has mean of norm {norm}, expected 0")]
    MeanViolation { factor: usize, norm: f64 },
    #[error("invalid scheme: {0}")]
    InvalidScheme(Box<DistributionError>),
    #[error("D0 component {component} has a jump of norm {norm} > tau = {tau}")]
    SpectralSupportViolation {
        component: usize,
        norm: f64,
        tau: f64,
    },
    #[error(
        "D0 moments deviate by {deviation:e}: expected mean {:?} cov {:?}, found mean {:?} cov {:?}",
        expected.mean.as_slice(), expected.covariance.as_slice(),
        found.mean.as_slice(), found.covariance.as_slice()
    )]
    MomentMismatch {
        expected: Box<Moments>,
        found: Box<Moments>,
        deviation: f64,
    },
    #[error("D0 component {0} is neither compound Poisson nor Gaussian")]
    InvalidD0Component(usize),
    #[error("covariance is not positive semidefinite: {0}")]
    NonPSDCovariance(String),
    #[error("a non-degenerate Gaussian component has no exact pmf")]
    GaussianNotExact,
    #[error("support grew to {atoms} atoms, above the cap of {cap}")]
    SupportExplosion { atoms: usize, cap: usize },
    #[error("compound Poisson rate must be finite and positive, got {0}")]
    InvalidRate(f64),
}

/// Mean vector and covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl Moments {
    pub fn zero(d: usize) -> Self {
        Self {
            mean: DVector::zeros(d),
            covariance: DMatrix::zeros(d, d),
        }
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    /// Moments of the convolution of two independent laws.
    pub fn add(&self, other: &Moments) -> Result<Moments, DistributionError> {
        if self.dimension() != other.dimension() {
            return Err(DistributionError::DimensionMismatch {
                expected: self.dimension(),
                found: other.dimension(),
            });
        }
        Ok(Moments {
            mean: &self.mean + &other.mean,
            covariance: &self.covariance + &other.covariance,
        })
    }

    /// Largest absolute entrywise difference of means and covariances.
    pub fn max_abs_diff(&self, other: &Moments) -> f64 {
        if self.dimension() != other.dimension() {
            return f64::INFINITY;
        }
        self.mean
            .iter()
            .zip(other.mean.iter())
            .chain(self.covariance.iter().zip(other.covariance.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Laws with closed-form mean and covariance.
pub trait HasMoments {
    fn moments(&self) -> Moments;
}

/// Laws that can draw independent samples.
pub trait Samplable {
    fn dimension(&self) -> usize;

    /// Adds one independent draw to `out` (so convolutions are sums).
    fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = vec![0.0; self.dimension()];
        self.add_sample(rng, &mut x);
        x
    }
}

/// `count` draws from `law` on the given stream.
pub fn sample_law<L: Samplable + ?Sized>(law: &L, stream: RngStream, count: usize) -> Vec<Vec<f64>> {
    let mut rng = stream.rng();
    (0..count).map(|_| law.sample(&mut rng)).collect()
}

/// Closed-form moments of any law in this module.
pub fn moments<L: HasMoments + ?Sized>(law: &L) -> Moments {
    law.moments()
}
