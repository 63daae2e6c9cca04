//! Distances between laws: exact one-dimensional and total-variation
//! oracles, and polyhedral discrepancies `L_m`, `π_m`, `ρ_m` evaluated over
//! finite families of polyhedra.
//!
//! Family-based values are lower bounds for the suprema over all of `𝒫_m`.
//! When a measure is empirical, reports carry a Hoeffding radius.

mod discrepancy;
mod line;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{DistributionError, FiniteLaw};
use crate::polyhedra::{Polyhedron, PolyhedronError, DEFAULT_TOL};
use crate::rng::RngStream;

pub use discrepancy::{
    discrepancy, metric_from_discrepancy, rho_m, DiscrepancyReport, Profiles,
    DEFAULT_METRIC_TOL,
};
pub use line::{
    halfline_discrepancy, halfline_metric, levy_1d_exact, levy_line, one_sided, tv_exact,
    LineMeasure, LINE_BISECTION_TOL,
};

/// Level used for confidence radii in reports.
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("measure has no points")]
    EmptyMeasure,
    #[error("polyhedron family is empty")]
    EmptyFamily,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("discrepancy increased between lambda = {lambda_low} and {lambda_high}")]
    NonMonotoneDetected { lambda_low: f64, lambda_high: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Polyhedron(#[from] PolyhedronError),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
}

/// Which enlargement of `P` is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    /// `P_λ`, every offset raised by `λ` (used by `L_m`).
    Inflate,
    /// `P^λ`, the Euclidean `λ`-neighbourhood (used by `π_m`).
    Neighborhood,
}

impl SetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SetKind::Inflate => "inflate",
            SetKind::Neighborhood => "neighborhood",
        }
    }
}

/// Where an empirical measure came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub stream: RngStream,
    pub source: String,
}

/// Equal-weight point cloud standing in for a law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    dim: usize,
    samples: Vec<Vec<f64>>,
    provenance: Option<Provenance>,
}

impl EmpiricalMeasure {
    pub fn new(dim: usize, samples: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        if let Some(s) = samples.iter().find(|s| s.len() != dim) {
            return Err(MetricError::DimensionMismatch {
                expected: dim,
                found: s.len(),
            });
        }
        Ok(Self {
            dim,
            samples,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, stream: RngStream, source: impl Into<String>) -> Self {
        self.provenance = Some(Provenance {
            stream,
            source: source.into(),
        });
        self
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }
}

/// A finite weighted point set: either an exact atomic law or an empirical
/// measure. Empirical probabilities are computed as exact counts over `n`.
pub trait Measure: Sync {
    fn dimension(&self) -> usize;
    fn len(&self) -> usize;
    fn point(&self, i: usize) -> &[f64];
    fn weight(&self, i: usize) -> f64;
    /// `Some(n)` for empirical measures with `n` samples.
    fn sample_count(&self) -> Option<usize>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Measure for FiniteLaw {
    fn dimension(&self) -> usize {
        FiniteLaw::dimension(self)
    }
    fn len(&self) -> usize {
        FiniteLaw::len(self)
    }
    fn point(&self, i: usize) -> &[f64] {
        self.atom(i)
    }
    fn weight(&self, i: usize) -> f64 {
        self.weights()[i]
    }
    fn sample_count(&self) -> Option<usize> {
        None
    }
}

impl Measure for EmpiricalMeasure {
    fn dimension(&self) -> usize {
        self.dim
    }
    fn len(&self) -> usize {
        self.samples.len()
    }
    fn point(&self, i: usize) -> &[f64] {
        &self.samples[i]
    }
    fn weight(&self, _: usize) -> f64 {
        1.0 / self.samples.len() as f64
    }
    fn sample_count(&self) -> Option<usize> {
        Some(self.samples.len())
    }
}

/// Which set a probability is taken of.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SetMode {
    Exact,
    Inflate(f64),
    Neighborhood(f64),
}

/// `μ{P}`, `μ{P_λ}` or `μ{P^λ}`.
pub fn measure_prob<M: Measure + ?Sized>(
    mu: &M,
    p: &Polyhedron,
    mode: SetMode,
) -> Result<f64, MetricError> {
    if mu.is_empty() {
        return Err(MetricError::EmptyMeasure);
    }
    if mu.dimension() != p.dimension() {
        return Err(MetricError::DimensionMismatch {
            expected: p.dimension(),
            found: mu.dimension(),
        });
    }
    let mut hits = 0usize;
    let mut mass = 0.0;
    for i in 0..mu.len() {
        let x = mu.point(i);
        let inside = match mode {
            SetMode::Exact => p.contains_unchecked(x),
            SetMode::Inflate(l) => {
                if l < 0.0 {
                    return Err(MetricError::NegativeLambda(l));
                }
                p.inflate(l)?.contains_unchecked(x)
            }
            SetMode::Neighborhood(l) => p.in_neighborhood(x, l, DEFAULT_TOL)?,
        };
        if inside {
            hits += 1;
            mass += mu.weight(i);
        }
    }
    Ok(match mu.sample_count() {
        Some(n) => hits as f64 / n as f64,
        None => mass,
    })
}

/// Hoeffding radius `sqrt(ln(4 F / δ) / (2 n))` with `n` the smallest
/// sample count. It bounds, with probability `1 - δ`, every error of the
/// `2F` probability estimates (`μ{P}` and `μ{P'}`) made from one sample.
pub fn confidence_radius(counts: &[usize], family_size: usize, delta: f64) -> f64 {
    let n = counts.iter().copied().min().unwrap_or(0);
    if n == 0 || family_size == 0 || !(delta > 0.0 && delta < 1.0) {
        return f64::INFINITY;
    }
    ((4.0 * family_size as f64 / delta).ln() / (2.0 * n as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_in_containing_polyhedron() {
        let p = Polyhedron::new(vec![vec![1.0, 0.0]], vec![0.5]).unwrap();
        assert_eq!(measure_prob(&FiniteLaw::zero(2), &p, SetMode::Exact).unwrap(), 1.0);
    }

    #[test]
    fn inflated_halfline_captures_far_atom() {
        let law = FiniteLaw::new(vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        let p = Polyhedron::new(vec![vec![1.0]], vec![1.0]).unwrap();
        assert_eq!(measure_prob(&law, &p, SetMode::Inflate(1.0)).unwrap(), 1.0);
        assert_eq!(measure_prob(&law, &p, SetMode::Exact).unwrap(), 0.5);
    }

    #[test]
    fn whole_space_has_full_empirical_mass() {
        let mu = EmpiricalMeasure::new(2, vec![vec![1.0, 2.0], vec![-5.0, 3.0], vec![0.0, 0.0]]).unwrap();
        let p = Polyhedron::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![f64::INFINITY; 2]).unwrap();
        assert_eq!(measure_prob(&mu, &p, SetMode::Neighborhood(0.0)).unwrap(), 1.0);
        let empty = EmpiricalMeasure::new(2, vec![]).unwrap();
        assert!(matches!(measure_prob(&empty, &p, SetMode::Exact), Err(MetricError::EmptyMeasure)));
    }

    #[test]
    fn radius_formula() {
        let r = confidence_radius(&[5000, 9000], 100, 0.05);
        assert!((r - (8000f64.ln() / 10000.0).sqrt()).abs() < 1e-15);
        assert!((r - 0.0300).abs() < 5e-5);
        assert!(confidence_radius(&[5000], 200, 0.05) >= r);
        assert!(confidence_radius(&[usize::MAX / 2], 1, 0.05) < 1e-8);
    }
}
