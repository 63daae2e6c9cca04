//! Accompanying infinitely divisible laws for mixture schemes of independent
//! summands, polyhedral Lévy/Prokhorov-type discrepancies, and the Monte Carlo
//! machinery used to check closeness bounds at desk scale.
//!
//! The crate is organised as five modules:
//!
//! - [`distributions`]: mixture schemes, finite-support laws, compound Poisson,
//!   Gaussian and convolution laws, the approximants `D`, `D*`, `D**`, `D̄`,
//!   and exact truncated pmfs.
//! - [`polyhedra`]: convex polyhedra with unit normals, inflation `P_λ`,
//!   Euclidean neighbourhoods `P^λ`, and the planar cut augmentation.
//! - [`metrics`]: exact and empirical discrepancies `L_m`, `π_m`, `ρ_m`,
//!   total variation and the one-dimensional Lévy distance.
//! - [`projection`]: coordinate maps `x ↦ (⟨x,t_j⟩)_j` and orthogonal
//!   projections onto `span{t_j}`, with pushforwards of laws.
//! - [`harness`]: experiment configs, bound sweeps, the Le Cam and
//!   Poissonization experiments, manifests, and the CLI.

#![forbid(unsafe_code)]

pub mod distributions;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod polyhedra;
pub mod projection;
pub mod rng;

pub use distributions::{
    CompoundPoissonLaw, Component, ConvolutionLaw, DistributionError, FiniteLaw, GaussianLaw,
    MixtureFactor, Moments, Scheme,
};
pub use metrics::{DiscrepancyReport, EmpiricalMeasure, MetricError, SetKind};
pub use polyhedra::{AugmentedPolyhedron, HalfSpace, Polyhedron, PolyhedronError};
pub use projection::{MapKind, ProjectionError, ProjectionMap};
pub use rng::RngStream;

use thiserror::Error;

/// Umbrella error for callers that mix modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Polyhedron(#[from] PolyhedronError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Harness(#[from] harness::HarnessError),
}

pub type Result<T> = std::result::Result<T, Error>;
