//! Exact distances between laws on the real line.
//!
//! A [`LineMeasure`] is either a finite atomic law or a Gaussian location
//! mixture with a common standard deviation (the form of `D*` in `d = 1`).
//! For `λ >= 0`,
//!
//! `A(G, H, λ) = sup_b G(-∞, b] - H(-∞, b + λ]`
//!
//! is attained (or approached) either at an atom `g` of `G` or just below
//! `h - λ` for an atom `h` of `H`. When one of the two is continuous the
//! other supplies every breakpoint, so both cases reduce to finite maxima.

use libm::erfc;

use super::MetricError;
use crate::distributions::{exact_pmf, Component, ConvolutionLaw, FiniteLaw};
use crate::linalg::dot;

/// Bisection width used for the exact one-dimensional distances.
pub const LINE_BISECTION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum LineMeasure {
    Discrete {
        /// Strictly increasing.
        atoms: Vec<f64>,
        weights: Vec<f64>,
        /// `cum[k]` is the mass of `(-∞, atoms[k]]`.
        cum: Vec<f64>,
    },
    GaussianMixture {
        means: Vec<f64>,
        weights: Vec<f64>,
        sd: f64,
    },
}

impl LineMeasure {
    /// Atomic law from unsorted points; equal points are merged.
    pub fn discrete(points: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut pts: Vec<(f64, f64)> = points.into_iter().collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pts.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pts.len());
        for (x, w) in pts {
            match atoms.last() {
                Some(&last) if last == x => *weights.last_mut().expect("nonempty") += w,
                _ => {
                    atoms.push(x);
                    weights.push(w);
                }
            }
        }
        let cum = weights
            .iter()
            .scan(0.0, |s, w| {
                *s += w;
                Some(*s)
            })
            .collect();
        LineMeasure::Discrete {
            atoms,
            weights,
            cum,
        }
    }

    pub fn from_finite(law: &FiniteLaw) -> Result<Self, MetricError> {
        if law.dimension() != 1 {
            return Err(MetricError::DimensionMismatch {
                expected: 1,
                found: law.dimension(),
            });
        }
        Ok(Self::discrete(law.iter().map(|(x, w)| (x[0], w))))
    }

    /// The image of `law` under `x ↦ <x, t>`.
    pub fn projected(law: &FiniteLaw, t: &[f64]) -> Self {
        Self::discrete(law.iter().map(|(x, w)| (dot(x, t), w)))
    }

    /// Empirical law of scalar samples.
    pub fn empirical(samples: &[f64]) -> Self {
        let w = 1.0 / samples.len() as f64;
        Self::discrete(samples.iter().map(|&x| (x, w)))
    }

    /// `Σ_k w_k N(μ_k, sd²)`; a zero `sd` gives the atomic law.
    pub fn gaussian_mixture(atoms: &FiniteLaw, shift: f64, sd: f64) -> Self {
        if sd == 0.0 {
            return Self::discrete(atoms.iter().map(|(x, w)| (x[0] + shift, w)));
        }
        LineMeasure::GaussianMixture {
            means: atoms.atoms().map(|x| x[0] + shift).collect(),
            weights: atoms.weights().to_vec(),
            sd,
        }
    }

    /// Exact representation of a one-dimensional convolution law. Gaussian
    /// components are pooled into one; the remaining components go through
    /// `exact_pmf` with the given tail tolerance.
    pub fn from_law(law: &ConvolutionLaw, tail_eps: f64) -> Result<Self, MetricError> {
        if law.dimension() != 1 {
            return Err(MetricError::DimensionMismatch {
                expected: 1,
                found: law.dimension(),
            });
        }
        let mut mean = 0.0;
        let mut var = 0.0;
        let mut rest = Vec::new();
        for c in law.components() {
            match c {
                Component::Gaussian(g) => {
                    mean += g.mean()[0];
                    var += g.covariance()[(0, 0)];
                }
                other => rest.push(other.clone()),
            }
        }
        let discrete = exact_pmf(&ConvolutionLaw::new(1, rest)?, tail_eps)?;
        Ok(Self::gaussian_mixture(&discrete, mean, var.max(0.0).sqrt()))
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self, LineMeasure::GaussianMixture { .. })
    }

    pub fn mass(&self) -> f64 {
        match self {
            LineMeasure::Discrete { cum, .. } => cum.last().copied().unwrap_or(0.0),
            LineMeasure::GaussianMixture { weights, .. } => weights.iter().sum(),
        }
    }

    /// Mass of `(-∞, x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            LineMeasure::Discrete { atoms, cum, .. } => {
                let k = atoms.partition_point(|&a| a <= x);
                if k == 0 {
                    0.0
                } else {
                    cum[k - 1]
                }
            }
            LineMeasure::GaussianMixture { means, weights, sd } => means
                .iter()
                .zip(weights)
                .map(|(m, w)| w * 0.5 * erfc(-(x - m) / (sd * std::f64::consts::SQRT_2)))
                .sum(),
        }
    }

    /// Mass of `(-∞, x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            LineMeasure::Discrete { atoms, cum, .. } => {
                let k = atoms.partition_point(|&a| a < x);
                if k == 0 {
                    0.0
                } else {
                    cum[k - 1]
                }
            }
            LineMeasure::GaussianMixture { .. } => self.cdf(x),
        }
    }

    fn breakpoints(&self) -> &[f64] {
        match self {
            LineMeasure::Discrete { atoms, .. } => atoms,
            LineMeasure::GaussianMixture { .. } => &[],
        }
    }

    /// The image under `x ↦ -x`.
    pub fn reflected(&self) -> Self {
        match self {
            LineMeasure::Discrete { atoms, weights, .. } => {
                Self::discrete(atoms.iter().zip(weights).map(|(a, w)| (-a, *w)))
            }
            LineMeasure::GaussianMixture { means, weights, sd } => LineMeasure::GaussianMixture {
                means: means.iter().map(|m| -m).collect(),
                weights: weights.clone(),
                sd: *sd,
            },
        }
    }

    /// Smallest and largest atom or mixture mean.
    pub fn range(&self) -> Option<(f64, f64)> {
        let pts = match self {
            LineMeasure::Discrete { atoms, .. } => atoms,
            LineMeasure::GaussianMixture { means, .. } => means,
        };
        let lo = pts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = pts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo <= hi).then_some((lo, hi))
    }
}

fn both_continuous(g: &LineMeasure, h: &LineMeasure) -> Result<(), MetricError> {
    if g.is_continuous() && h.is_continuous() {
        return Err(MetricError::Unsupported(
            "exact line discrepancy needs at least one atomic law".into(),
        ));
    }
    Ok(())
}

/// `sup_b G(-∞, b] - H(-∞, b + λ]` (may be negative only through rounding;
/// the supremum over `b → ±∞` is `0` for equal masses).
pub fn one_sided(g: &LineMeasure, h: &LineMeasure, lambda: f64) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for &a in g.breakpoints() {
        best = best.max(g.cdf(a) - h.cdf(a + lambda));
    }
    for &b in h.breakpoints() {
        best = best.max(g.cdf_left(b - lambda) - h.cdf_left(b));
    }
    best
}

/// Discrepancy over all half-lines `{x <= b}` and `{x >= b}`, symmetrised
/// in `(G, H)` and clamped at zero. The inflation and the neighbourhood of a
/// half-line coincide, so this is both `L_1(G, H, λ)` and `π_1(G, H, λ)`.
pub fn halfline_discrepancy(g: &LineMeasure, h: &LineMeasure, lambda: f64) -> Result<f64, MetricError> {
    both_continuous(g, h)?;
    let (gr, hr) = (g.reflected(), h.reflected());
    Ok([
        one_sided(g, h, lambda),
        one_sided(h, g, lambda),
        one_sided(&gr, &hr, lambda),
        one_sided(&hr, &gr, lambda),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

/// `inf {λ : f(λ) <= λ}` on `[0, hi]` for nonincreasing `f`, to width `tol`.
pub(crate) fn crossing<F>(mut f: F, hi: f64, tol: f64) -> Result<f64, MetricError>
where
    F: FnMut(f64) -> Result<f64, MetricError>,
{
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut eval = |lam: f64, seen: &mut Vec<(f64, f64)>| -> Result<f64, MetricError> {
        let v = f(lam)?;
        for &(l, w) in seen.iter() {
            if (l < lam && w < v - 1e-12) || (l > lam && w > v + 1e-12) {
                return Err(MetricError::NonMonotoneDetected {
                    lambda_low: l.min(lam),
                    lambda_high: l.max(lam),
                });
            }
        }
        seen.push((lam, v));
        Ok(v)
    };
    if eval(0.0, &mut seen)? <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, hi);
    if eval(hi, &mut seen)? > hi {
        return Err(MetricError::Unsupported(format!(
            "no crossing below lambda = {hi}"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if eval(mid, &mut seen)? <= mid {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn span(g: &LineMeasure, h: &LineMeasure) -> f64 {
    match (g.range(), h.range()) {
        (Some((a, b)), Some((c, d))) => b.max(d) - a.min(c),
        _ => 0.0,
    }
}

/// `L_1(G, H) = inf {λ : L_1(G, H, λ) <= λ}` over all half-lines.
pub fn halfline_metric(g: &LineMeasure, h: &LineMeasure, tol: f64) -> Result<f64, MetricError> {
    both_continuous(g, h)?;
    crossing(|l| halfline_discrepancy(g, h, l), 1.0 + span(g, h), tol)
}

/// The Lévy distance
/// `inf {ε : F(b - ε) - ε <= G(b) <= F(b + ε) + ε for all b}`
/// between two finite laws on the line.
pub fn levy_1d_exact(f: &FiniteLaw, g: &FiniteLaw) -> Result<f64, MetricError> {
    let (f, g) = (LineMeasure::from_finite(f)?, LineMeasure::from_finite(g)?);
    levy_line(&f, &g)
}

/// Lévy distance between line measures (at most one continuous).
pub fn levy_line(f: &LineMeasure, g: &LineMeasure) -> Result<f64, MetricError> {
    both_continuous(f, g)?;
    crossing(
        |e| Ok(one_sided(f, g, e).max(one_sided(g, f, e)).max(0.0)),
        1.0 + span(f, g),
        LINE_BISECTION_TOL,
    )
}

/// Total variation `½ Σ |F{x} - G{x}|` over the union of atoms, matched by
/// exact coordinate equality.
pub fn tv_exact(f: &FiniteLaw, g: &FiniteLaw) -> Result<f64, MetricError> {
    use crate::distributions::lex_cmp;
    use std::cmp::Ordering;

    if f.dimension() != g.dimension() {
        return Err(MetricError::DimensionMismatch {
            expected: f.dimension(),
            found: g.dimension(),
        });
    }
    fn sorted(l: &FiniteLaw) -> Vec<(&[f64], f64)> {
        let mut v: Vec<(&[f64], f64)> = l.iter().collect();
        v.sort_by(|a, b| lex_cmp(a.0, b.0));
        v
    }
    let (a, b) = (sorted(f), sorted(g));
    let (mut i, mut j) = (0, 0);
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let ord = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => lex_cmp(x.0, y.0),
            (Some(_), None) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                total += a[i].1.abs();
                i += 1;
            }
            Ordering::Greater => {
                total += b[j].1.abs();
                j += 1;
            }
            Ordering::Equal => {
                total += (a[i].1 - b[j].1).abs();
                i += 1;
                j += 1;
            }
        }
    }
    Ok(0.5 * total)
}
