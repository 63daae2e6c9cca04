use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DistributionError, HasMoments, Moments, Samplable};
use crate::linalg::{grid_key, grid_value, norm};

/// Tolerance on the total mass of a user-supplied finite law.
pub const MASS_TOL: f64 = 1e-12;

/// A distribution on `R^d` with finitely many atoms.
///
/// Laws built by [`FiniteLaw::new`] carry total mass 1 (within `1e-12`).
/// Truncated pmfs produced by `exact_pmf` may be sub-stochastic; their
/// missing mass is bounded by the requested tail tolerance and reported by
/// [`FiniteLaw::mass`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FiniteLawRepr", into = "FiniteLawRepr")]
pub struct FiniteLaw {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FiniteLawRepr {
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl TryFrom<FiniteLawRepr> for FiniteLaw {
    type Error = DistributionError;
    fn try_from(r: FiniteLawRepr) -> Result<Self, Self::Error> {
        FiniteLaw::new(r.atoms, r.weights)
    }
}

impl From<FiniteLaw> for FiniteLawRepr {
    fn from(law: FiniteLaw) -> Self {
        FiniteLawRepr {
            atoms: law.atoms().map(|a| a.to_vec()).collect(),
            weights: law.weights,
        }
    }
}

impl FiniteLaw {
    /// Strict constructor: equal lengths, a shared positive dimension,
    /// nonnegative weights summing to 1, pairwise distinct atoms.
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self, DistributionError> {
        if atoms.is_empty() {
            return Err(DistributionError::InvalidLaw("no atoms".into()));
        }
        if atoms.len() != weights.len() {
            return Err(DistributionError::InvalidLaw(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let dim = atoms[0].len();
        if dim == 0 {
            return Err(DistributionError::InvalidLaw("zero-dimensional atom".into()));
        }
        for a in &atoms {
            if a.len() != dim {
                return Err(DistributionError::DimensionMismatch {
                    expected: dim,
                    found: a.len(),
                });
            }
            if a.iter().any(|x| !x.is_finite()) {
                return Err(DistributionError::InvalidLaw("non-finite atom coordinate".into()));
            }
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DistributionError::InvalidLaw("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(DistributionError::InvalidLaw(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&i, &j| lex_cmp(&atoms[i], &atoms[j]));
        if order.windows(2).any(|w| atoms[w[0]] == atoms[w[1]]) {
            return Err(DistributionError::InvalidLaw("duplicate atoms".into()));
        }
        let coords = atoms.into_iter().flatten().collect();
        Ok(Self::from_parts(dim, coords, weights))
    }

    pub(crate) fn from_parts(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self {
            dim,
            coords,
            weights,
            cumulative,
        }
    }

    /// The point mass `E_x`.
    pub fn point_mass(x: Vec<f64>) -> Self {
        let dim = x.len();
        Self::from_parts(dim, x, vec![1.0])
    }

    pub fn zero(dim: usize) -> Self {
        Self::point_mass(vec![0.0; dim])
    }

    /// Uniform law on the given (distinct) atoms.
    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self, DistributionError> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    /// Collects weighted points, merging coincident points on the `1e-12`
    /// grid. Total mass is not checked.
    pub fn from_weighted_points<'a, I>(dim: usize, points: I) -> Self
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut acc = GridAccumulator::new(dim);
        for (x, w) in points {
            acc.add(x, w);
        }
        acc.into_law()
    }

    /// `sum_k w_k L_k` for laws of a common dimension; weights must sum to 1.
    pub fn mixture(parts: &[(f64, &FiniteLaw)]) -> Result<Self, DistributionError> {
        let dim = parts
            .first()
            .map(|(_, l)| l.dim)
            .ok_or_else(|| DistributionError::InvalidLaw("empty mixture".into()))?;
        let mut total = 0.0;
        let mut acc = GridAccumulator::new(dim);
        for (w, law) in parts {
            if law.dim != dim {
                return Err(DistributionError::DimensionMismatch {
                    expected: dim,
                    found: law.dim,
                });
            }
            if !(w.is_finite() && *w >= 0.0) {
                return Err(DistributionError::InvalidLaw(format!("mixture weight {w}")));
            }
            total += w;
            for (x, lw) in law.iter() {
                acc.add(x, w * lw);
            }
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(DistributionError::InvalidLaw(format!(
                "mixture weights sum to {total}"
            )));
        }
        Ok(acc.into_law())
    }

    /// Discretizes a sample of an arbitrary law onto the lattice
    /// `spacing * Z^d`; each point is rounded to its nearest lattice node and
    /// the nodes receive empirical frequencies.
    pub fn discretize(samples: &[Vec<f64>], spacing: f64) -> Result<Self, DistributionError> {
        if samples.is_empty() || !(spacing > 0.0) {
            return Err(DistributionError::InvalidLaw(
                "discretization needs samples and a positive spacing".into(),
            ));
        }
        let dim = samples[0].len();
        let w = 1.0 / samples.len() as f64;
        let mut acc = GridAccumulator::new(dim);
        let mut node = vec![0.0; dim];
        for s in samples {
            if s.len() != dim {
                return Err(DistributionError::DimensionMismatch {
                    expected: dim,
                    found: s.len(),
                });
            }
            for (n, x) in node.iter_mut().zip(s) {
                *n = (x / spacing).round() * spacing;
            }
            acc.add(&node, w);
        }
        Ok(acc.into_law())
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.atoms().zip(self.weights.iter().copied())
    }

    /// Total mass; 1 for proper laws, `1 - missing` for truncated pmfs.
    pub fn mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Largest norm among atoms carrying positive weight.
    pub fn support_radius(&self) -> f64 {
        self.iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(x, _)| norm(x))
            .fold(0.0, f64::max)
    }

    /// Weight assigned to `x` (exact coordinate match).
    pub fn pmf_at(&self, x: &[f64]) -> f64 {
        self.iter()
            .filter(|(a, _)| *a == x)
            .map(|(_, w)| w)
            .sum()
    }

    /// The law translated by `a` (convolution with `E_a`).
    pub fn shifted(&self, a: &[f64]) -> Self {
        let mut coords = self.coords.clone();
        for chunk in coords.chunks_exact_mut(self.dim) {
            for (c, s) in chunk.iter_mut().zip(a) {
                *c += s;
            }
        }
        Self::from_parts(self.dim, coords, self.weights.clone())
    }

    /// Image of the law under `x -> f(x)`, merging coincident images.
    pub fn map_atoms<F>(&self, target_dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut acc = GridAccumulator::new(target_dim);
        for (x, w) in self.iter() {
            acc.add(&f(x), w);
        }
        acc.into_law()
    }

    /// Exact convolution `self * other`, merged on the `1e-12` grid.
    pub fn convolve(&self, other: &FiniteLaw, cap: usize) -> Result<Self, DistributionError> {
        if self.dim != other.dim {
            return Err(DistributionError::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut acc = GridAccumulator::new(self.dim);
        let mut buf = vec![0.0; self.dim];
        for (x, wx) in self.iter() {
            for (y, wy) in other.iter() {
                for k in 0..self.dim {
                    buf[k] = x[k] + y[k];
                }
                acc.add(&buf, wx * wy);
            }
            if acc.len() > cap {
                return Err(DistributionError::SupportExplosion {
                    atoms: acc.len(),
                    cap,
                });
            }
        }
        Ok(acc.into_law())
    }

    /// Normalized mean vector.
    pub fn mean(&self) -> Vec<f64> {
        let mass = self.mass();
        let mut m = vec![0.0; self.dim];
        for (x, w) in self.iter() {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += w * xi;
            }
        }
        m.iter_mut().for_each(|v| *v /= mass);
        m
    }

    /// Normalized second-moment matrix `E[X X^T]`.
    pub fn second_moment(&self) -> DMatrix<f64> {
        let mass = self.mass();
        let d = self.dim;
        let mut s = DMatrix::zeros(d, d);
        for (x, w) in self.iter() {
            for i in 0..d {
                for j in i..d {
                    s[(i, j)] += w * x[i] * x[j];
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                s[(i, j)] /= mass;
                s[(j, i)] = s[(i, j)];
            }
        }
        s
    }

    /// Index of the atom selected by a uniform draw `u` in `[0, mass)`.
    fn locate(&self, u: f64) -> usize {
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.len() - 1)
    }
}

impl HasMoments for FiniteLaw {
    fn moments(&self) -> Moments {
        let d = self.dim;
        let mass = self.mass();
        let mean = self.mean();
        let mut cov = DMatrix::zeros(d, d);
        for (x, w) in self.iter() {
            for i in 0..d {
                let ci = x[i] - mean[i];
                for j in i..d {
                    cov[(i, j)] += w * ci * (x[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                cov[(i, j)] /= mass;
                cov[(j, i)] = cov[(i, j)];
            }
        }
        Moments {
            mean: DVector::from_vec(mean),
            covariance: cov,
        }
    }
}

impl Samplable for FiniteLaw {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u = rng.random::<f64>() * self.mass();
        let x = self.atom(self.locate(u));
        for (o, xi) in out.iter_mut().zip(x) {
            *o += xi;
        }
    }
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Accumulates weighted points keyed on the `1e-12` grid. Output atoms are
/// the grid representatives, sorted lexicographically by key, so the result
/// does not depend on hash order.
pub(crate) struct GridAccumulator {
    dim: usize,
    map: HashMap<Vec<i128>, f64>,
}

impl GridAccumulator {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            dim,
            map: HashMap::new(),
        }
    }

    pub(crate) fn add(&mut self, x: &[f64], w: f64) {
        let key: Vec<i128> = x.iter().map(|&v| grid_key(v)).collect();
        *self.map.entry(key).or_insert(0.0) += w;
    }

    pub(crate) fn len(&self) -> usize {
        self.map.len()
    }

    pub(crate) fn into_law(self) -> FiniteLaw {
        let mut entries: Vec<(Vec<i128>, f64)> =
            self.map.into_iter().filter(|(_, w)| *w > 0.0).collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut coords = Vec::with_capacity(entries.len() * self.dim);
        let mut weights = Vec::with_capacity(entries.len());
        for (k, w) in entries {
            coords.extend(k.iter().map(|&v| grid_value(v)));
            weights.push(w);
        }
        FiniteLaw::from_parts(self.dim, coords, weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_weights_and_duplicates() {
        assert!(FiniteLaw::new(vec![vec![0.0]], vec![0.9]).is_err());
        assert!(FiniteLaw::new(vec![vec![0.0], vec![1.0]], vec![1.2, -0.2]).is_err());
        assert!(FiniteLaw::new(vec![vec![0.0], vec![0.0]], vec![0.5, 0.5]).is_err());
        assert!(FiniteLaw::new(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5]).is_err());
        assert!(FiniteLaw::new(vec![], vec![]).is_err());
    }

    #[test]
    fn symmetric_pair_moments() {
        let law = FiniteLaw::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let m = law.moments();
        assert_eq!(m.mean[0], 0.0);
        assert_eq!(m.covariance[(0, 0)], 1.0);
    }

    #[test]
    fn mixture_merges_shared_atoms() {
        let a = FiniteLaw::point_mass(vec![0.0]);
        let b = FiniteLaw::new(vec![vec![0.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        let m = FiniteLaw::mixture(&[(0.5, &a), (0.5, &b)]).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.pmf_at(&[0.0]), 0.75);
        assert_eq!(m.pmf_at(&[1.0]), 0.25);
    }

    #[test]
    fn convolution_of_bernoullis_is_binomial() {
        let b = FiniteLaw::new(vec![vec![0.0], vec![1.0]], vec![0.7, 0.3]).unwrap();
        let two = b.convolve(&b, usize::MAX).unwrap();
        assert!((two.pmf_at(&[0.0]) - 0.49).abs() < 1e-15);
        assert!((two.pmf_at(&[1.0]) - 0.42).abs() < 1e-15);
        assert!((two.pmf_at(&[2.0]) - 0.09).abs() < 1e-15);
    }

    #[test]
    fn convolution_cap_is_enforced() {
        let u = FiniteLaw::uniform((0..10).map(|i| vec![i as f64 * 0.37]).collect()).unwrap();
        let v = FiniteLaw::uniform((0..10).map(|i| vec![i as f64 * 10.0]).collect()).unwrap();
        assert!(matches!(
            u.convolve(&v, 50),
            Err(DistributionError::SupportExplosion { .. })
        ));
    }

    #[test]
    fn zero_weight_atoms_are_never_sampled() {
        let law = FiniteLaw::new(vec![vec![0.0], vec![5.0], vec![1.0]], vec![0.5, 0.0, 0.5]).unwrap();
        let mut rng = crate::RngStream::new(1, 0).rng();
        for _ in 0..2000 {
            let mut out = [0.0];
            law.add_sample(&mut rng, &mut out);
            assert_ne!(out[0], 5.0);
        }
    }

    #[test]
    fn discretize_rounds_to_lattice() {
        let s = vec![vec![0.04], vec![0.06], vec![0.26]];
        let law = FiniteLaw::discretize(&s, 0.1).unwrap();
        assert_eq!(law.len(), 3);
        assert!((law.pmf_at(&[0.0]) - 1.0 / 3.0).abs() < 1e-15);
        assert!((law.pmf_at(&[0.3]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip() {
        let law = FiniteLaw::new(vec![vec![0.0, 1.0], vec![2.0, -1.0]], vec![0.25, 0.75]).unwrap();
        let s = serde_json::to_string(&law).unwrap();
        assert_eq!(s, r#"{"atoms":[[0.0,1.0],[2.0,-1.0]],"weights":[0.25,0.75]}"#);
        let back: FiniteLaw = serde_json::from_str(&s).unwrap();
        assert_eq!(back, law);
        assert!(serde_json::from_str::<FiniteLaw>(r#"{"atoms":[[0.0]],"weights":[0.5]}"#).is_err());
    }
}
