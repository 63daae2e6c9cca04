use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::line::crossing;
use super::{confidence_radius, Measure, MetricError, SetKind, DEFAULT_DELTA};
use crate::polyhedra::{Polyhedron, PolyhedronError, DEFAULT_TOL};

/// Default bisection width for `metric_from_discrepancy`.
pub const DEFAULT_METRIC_TOL: f64 = 1e-6;

/// Discrepancy of two measures over a polyhedron family at one `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyReport {
    /// `max(raw_value, 0)`.
    pub value: f64,
    pub raw_value: f64,
    pub lambda: f64,
    pub kind: SetKind,
    pub family_size: usize,
    pub confidence_radius: f64,
    /// Lowest index attaining the maximum.
    pub witness_index: usize,
}

impl DiscrepancyReport {
    pub const CSV_HEADER: &'static str = "kind,lambda,value,conf_radius,family_size,witness_index";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.kind.as_str(),
            self.lambda,
            self.value,
            self.confidence_radius,
            self.family_size,
            self.witness_index
        )
    }
}

/// Sorted "entry levels" of every point for one polyhedron: the smallest
/// `λ` at which the point lies in `P_λ` (or `P^λ`), with cumulative mass.
#[derive(Debug, Clone)]
struct Profile {
    keys: Vec<f64>,
    cum: Vec<f64>,
}

impl Profile {
    fn build<M: Measure + ?Sized>(mu: &M, p: &Polyhedron, kind: SetKind) -> Result<Self, MetricError> {
        let mut entries = Vec::with_capacity(mu.len());
        let infeasible = kind == SetKind::Neighborhood && !p.is_feasible()?;
        let single = p.finite_indices().count() <= 1;
        for i in 0..mu.len() {
            let x = mu.point(i);
            let slack = p.slack_key(x);
            let key = match kind {
                SetKind::Inflate => slack,
                SetKind::Neighborhood if slack <= 0.0 || single => slack,
                SetKind::Neighborhood if infeasible => f64::INFINITY,
                SetKind::Neighborhood => match p.distance_to(x, DEFAULT_TOL) {
                    Ok(d) => d,
                    Err(PolyhedronError::Infeasible) => f64::INFINITY,
                    Err(e) => return Err(e.into()),
                },
            };
            entries.push((key, mu.weight(i)));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        let cum = match mu.sample_count() {
            Some(n) => (1..=entries.len()).map(|k| k as f64 / n as f64).collect(),
            None => entries
                .iter()
                .scan(0.0, |s, e| {
                    *s += e.1;
                    Some(*s)
                })
                .collect(),
        };
        Ok(Profile {
            keys: entries.into_iter().map(|e| e.0).collect(),
            cum,
        })
    }

    /// Mass of the points with level `<= lambda`.
    fn prob(&self, lambda: f64) -> f64 {
        match self.keys.partition_point(|&k| k <= lambda) {
            0 => 0.0,
            k => self.cum[k - 1],
        }
    }
}

/// Precomputed per-polyhedron profiles of two measures. Evaluating at a new
/// `λ` costs two binary searches per polyhedron.
#[derive(Debug, Clone)]
pub struct Profiles {
    kind: SetKind,
    pairs: Vec<(Profile, Profile)>,
    confidence_radius: f64,
    diameter: f64,
}

fn check_inputs<G, H>(g: &G, h: &H, family: &[Polyhedron]) -> Result<(), MetricError>
where
    G: Measure + ?Sized,
    H: Measure + ?Sized,
{
    if family.is_empty() {
        return Err(MetricError::EmptyFamily);
    }
    if g.is_empty() || h.is_empty() {
        return Err(MetricError::EmptyMeasure);
    }
    for found in [g.dimension(), h.dimension()]
        .into_iter()
        .chain(family.iter().map(Polyhedron::dimension))
    {
        if found != g.dimension() {
            return Err(MetricError::DimensionMismatch {
                expected: g.dimension(),
                found,
            });
        }
    }
    Ok(())
}

/// Diagonal of the bounding box of both supports.
fn diameter<G: Measure + ?Sized, H: Measure + ?Sized>(g: &G, h: &H) -> f64 {
    let d = g.dimension();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let pts = (0..g.len()).map(|i| g.point(i)).chain((0..h.len()).map(|i| h.point(i)));
    for x in pts {
        for k in 0..d {
            lo[k] = lo[k].min(x[k]);
            hi[k] = hi[k].max(x[k]);
        }
    }
    lo.iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}

impl Profiles {
    pub fn build<G, H>(g: &G, h: &H, family: &[Polyhedron], kind: SetKind) -> Result<Self, MetricError>
    where
        G: Measure + ?Sized,
        H: Measure + ?Sized,
    {
        check_inputs(g, h, family)?;
        let pairs = family
            .par_iter()
            .map(|p| Ok((Profile::build(g, p, kind)?, Profile::build(h, p, kind)?)))
            .collect::<Result<Vec<_>, MetricError>>()?;
        let radius = [g.sample_count(), h.sample_count()]
            .into_iter()
            .flatten()
            .map(|n| confidence_radius(&[n], family.len(), DEFAULT_DELTA))
            .sum();
        Ok(Self {
            kind,
            pairs,
            confidence_radius: radius,
            diameter: diameter(g, h),
        })
    }

    pub fn family_size(&self) -> usize {
        self.pairs.len()
    }

    pub fn confidence_radius(&self) -> f64 {
        self.confidence_radius
    }

    /// Per-polyhedron values `max{G{P} - H{P'}, H{P} - G{P'}}`.
    pub fn values(&self, lambda: f64) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|(pg, ph)| (pg.prob(0.0) - ph.prob(lambda)).max(ph.prob(0.0) - pg.prob(lambda)))
            .collect()
    }

    pub fn evaluate(&self, lambda: f64) -> Result<DiscrepancyReport, MetricError> {
        if !(lambda >= 0.0) {
            return Err(MetricError::NegativeLambda(lambda));
        }
        let mut best = f64::NEG_INFINITY;
        let mut witness = 0;
        for (i, v) in self.values(lambda).into_iter().enumerate() {
            if v > best {
                best = v;
                witness = i;
            }
        }
        Ok(DiscrepancyReport {
            value: best.max(0.0),
            raw_value: best,
            lambda,
            kind: self.kind,
            family_size: self.pairs.len(),
            confidence_radius: self.confidence_radius,
            witness_index: witness,
        })
    }

    /// `inf {λ : value(λ) <= λ}` by bisection on `[0, diameter + 1]`.
    pub fn metric(&self, tol: f64) -> Result<f64, MetricError> {
        crossing(|l| Ok(self.evaluate(l)?.value), 1.0 + self.diameter, tol)
    }
}

/// `max_P max{G{P} - H{P'}, H{P} - G{P'}}` over `family`, with `P' = P_λ`
/// or `P^λ`.
pub fn discrepancy<G, H>(
    g: &G,
    h: &H,
    family: &[Polyhedron],
    lambda: f64,
    kind: SetKind,
) -> Result<DiscrepancyReport, MetricError>
where
    G: Measure + ?Sized,
    H: Measure + ?Sized,
{
    if !(lambda >= 0.0) {
        return Err(MetricError::NegativeLambda(lambda));
    }
    Profiles::build(g, h, family, kind)?.evaluate(lambda)
}

/// `inf {λ : discrepancy(λ) <= λ}`, the family version of `L_m` or `π_m`.
pub fn metric_from_discrepancy<G, H>(
    g: &G,
    h: &H,
    family: &[Polyhedron],
    kind: SetKind,
    tol: f64,
) -> Result<f64, MetricError>
where
    G: Measure + ?Sized,
    H: Measure + ?Sized,
{
    Profiles::build(g, h, family, kind)?.metric(tol)
}

/// `max_P |F{P} - G{P}|` over `family`.
pub fn rho_m<F, G>(f: &F, g: &G, family: &[Polyhedron]) -> Result<f64, MetricError>
where
    F: Measure + ?Sized,
    G: Measure + ?Sized,
{
    check_inputs(f, g, family)?;
    let best = family
        .par_iter()
        .map(|p| (set_mass(f, p) - set_mass(g, p)).abs())
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// `μ{P}`, with empirical measures counted exactly.
fn set_mass<M: Measure + ?Sized>(mu: &M, p: &Polyhedron) -> f64 {
    let mut hits = 0usize;
    let mut m = 0.0;
    for i in 0..mu.len() {
        if p.contains_unchecked(mu.point(i)) {
            hits += 1;
            m += mu.weight(i);
        }
    }
    match mu.sample_count() {
        Some(n) => hits as f64 / n as f64,
        None => m,
    }
}
