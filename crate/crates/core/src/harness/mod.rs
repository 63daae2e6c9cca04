//! Experiment plumbing: configs, bound sweeps, the Le Cam and Poissonization
//! experiments, result artifacts, and the command-line front end.
//!
//! Every experiment is a pure function of its config and seed. Grid cells run
//! in parallel on per-cell [`RngStream`](crate::RngStream)s derived from
//! `(seed, cell index)` and are merged in cell order, so outputs do not depend
//! on the thread count.

pub mod cli;
mod config;
mod lecam;
mod manifest;
mod poisson;
mod sweep;

use thiserror::Error;

use crate::distributions::DistributionError;
use crate::metrics::MetricError;
use crate::polyhedra::PolyhedronError;
use crate::projection::ProjectionError;

pub use config::{
    dstarstar_instance, lattice_scheme, Approximant, ExperimentConfig, FamilySpec, Grid, SchemeSpec,
};
pub use lecam::{lecam_experiment, LecamRow, LECAM_TAIL_EPS};
pub use manifest::{config_hash, RunManifest, BERNSTEIN_FORM};
pub use poisson::{
    bernstein_tail, poissonization_experiment, random_instance, PoissonizationInstance,
    PoissonizationRow,
};
pub use sweep::{
    analyze_shape, pearson, run_bound_sweep, tau_term, CellResult, Method, ProfileCheck, ShapeReport,
    SpreadCheck, FLOOR_FACTOR, PEARSON_LIMIT, PROFILE_MIN_POINTS, SPREAD_LIMIT,
};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "ACCOMPANY_LAB_THREADS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sandwich violated at lambda = {lambda}: {detail}")]
    SandwichViolation { lambda: f64, detail: String },
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Polyhedron(#[from] PolyhedronError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

impl HarnessError {
    /// Process exit code: 1 for bad input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::InvalidConfig(_) | HarnessError::Usage(_) | HarnessError::Json(_) => 1,
            HarnessError::Distribution(e) if is_validation(e) => 1,
            HarnessError::Polyhedron(PolyhedronError::ZeroNormal(_))
            | HarnessError::Polyhedron(PolyhedronError::DimensionMismatch { .. })
            | HarnessError::Polyhedron(PolyhedronError::InvalidOffset(_))
            | HarnessError::Polyhedron(PolyhedronError::InvalidParameter(_))
            | HarnessError::Polyhedron(PolyhedronError::UnsupportedDimension(_)) => 1,
            _ => 2,
        }
    }
}

fn is_validation(e: &DistributionError) -> bool {
    use DistributionError::*;
    match e {
        InvalidScheme(_) | WeightViolation { .. } | SupportViolation { .. } | MeanViolation { .. }
        | InvalidLaw(_) | DimensionMismatch { .. } | SpectralSupportViolation { .. }
        | MomentMismatch { .. } | InvalidD0Component(_) | NonPSDCovariance(_) | InvalidRate(_) => true,
        GaussianNotExact | SupportExplosion { .. } => false,
    }
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` on a rayon pool sized by [`thread_cap`] (or the rayon default).
pub fn with_thread_pool<T, F>(f: F) -> Result<T, HarnessError>
where
    F: FnOnce() -> T + Send,
    T: Send,
{
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}
