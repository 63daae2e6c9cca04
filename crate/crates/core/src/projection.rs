//! Linear maps that reduce dimension: the coordinate map
//! `𝔸 x = (<x, t_1>, ..., <x, t_m>)` into `R^m`, and the orthogonal projection
//! onto `L_t = span{t_j}` expressed in an orthonormal basis of `L_t`.
//!
//! Both push laws forward exactly, and both carry polyhedra built on the
//! directions `t_j` to polyhedra in the target space with the same events.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{
    exact_pmf_with_cap, lex_cmp, CompoundPoissonLaw, Component, ConvolutionLaw,
    DistributionError, FiniteLaw, GaussianLaw, Moments, DEFAULT_ATOM_CAP,
};
use crate::linalg::{axpy, dot, norm};
use crate::polyhedra::{Polyhedron, PolyhedronError, UNIT_TOL};

/// Directions whose residual falls below this are dropped from the basis.
pub const RANK_TOL: f64 = 1e-10;
/// Atoms closer than this (coordinatewise) are identified when comparing pmfs.
pub const MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("direction {0} is zero")]
    ZeroDirection(usize),
    #[error("no directions given")]
    NoDirections,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("normal {index} is not in the span of the map directions (residual {residual:e})")]
    NotInSubspace { index: usize, residual: f64 },
    #[error("box polyhedra need a coordinate map built on the polyhedron's normals")]
    NotCoordinate,
    #[error(transparent)]
    Distribution(#[from] DistributionError),
    #[error(transparent)]
    Polyhedron(#[from] PolyhedronError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    /// `x ↦ (<x, t_j>)_j ∈ R^m`.
    Coordinate,
    /// `x ↦` coordinates of `ℙ_t x` in an orthonormal basis of `span{t_j}`.
    Orthogonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MapRepr", into = "MapRepr")]
pub struct ProjectionMap {
    dim: usize,
    directions: Vec<Vec<f64>>,
    kind: MapKind,
    /// Orthonormal basis of `span{t_j}` (orthogonal kind only).
    basis: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct MapRepr {
    directions: Vec<Vec<f64>>,
    kind: MapKind,
}

impl TryFrom<MapRepr> for ProjectionMap {
    type Error = ProjectionError;
    fn try_from(r: MapRepr) -> Result<Self, Self::Error> {
        ProjectionMap::new(r.directions, r.kind)
    }
}

impl From<ProjectionMap> for MapRepr {
    fn from(m: ProjectionMap) -> Self {
        MapRepr {
            directions: m.directions,
            kind: m.kind,
        }
    }
}

/// Gram-Schmidt with pivoting on the largest residual; directions whose
/// residual norm is below [`RANK_TOL`] are dropped.
fn orthonormal_basis(directions: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut residuals: Vec<Vec<f64>> = directions.to_vec();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    loop {
        let Some((best, r)) = residuals
            .iter()
            .enumerate()
            .map(|(i, v)| (i, norm(v)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if r <= RANK_TOL {
            break;
        }
        let mut q: Vec<f64> = residuals.swap_remove(best).into_iter().map(|v| v / r).collect();
        // Second pass against the existing basis for numerical orthogonality.
        for b in &basis {
            let c = dot(&q, b);
            axpy(-c, b, &mut q);
        }
        let rq = norm(&q);
        q.iter_mut().for_each(|v| *v /= rq);
        for v in residuals.iter_mut() {
            let c = dot(v, &q);
            axpy(-c, &q, v);
        }
        basis.push(q);
    }
    basis
}

impl ProjectionMap {
    /// `build_map`: normalises the directions (leaving already-unit vectors
    /// untouched) and, for the orthogonal kind, computes a basis of their span.
    pub fn new(directions: Vec<Vec<f64>>, kind: MapKind) -> Result<Self, ProjectionError> {
        let dim = directions.first().map(Vec::len).ok_or(ProjectionError::NoDirections)?;
        let mut unit = Vec::with_capacity(directions.len());
        for (i, t) in directions.into_iter().enumerate() {
            if t.len() != dim {
                return Err(ProjectionError::DimensionMismatch {
                    expected: dim,
                    found: t.len(),
                });
            }
            let r = norm(&t);
            if !(r > 0.0 && r.is_finite()) {
                return Err(ProjectionError::ZeroDirection(i));
            }
            unit.push(if (r - 1.0).abs() <= UNIT_TOL {
                t
            } else {
                t.into_iter().map(|v| v / r).collect()
            });
        }
        let basis = match kind {
            MapKind::Coordinate => Vec::new(),
            MapKind::Orthogonal => orthonormal_basis(&unit),
        };
        Ok(Self {
            dim,
            directions: unit,
            kind,
            basis,
        })
    }

    /// Map built on the normals of `p` (halfspaces with infinite offsets
    /// included).
    pub fn from_polyhedron(p: &Polyhedron, kind: MapKind) -> Result<Self, ProjectionError> {
        Self::new(p.halfspaces().iter().map(|h| h.normal.clone()).collect(), kind)
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn source_dim(&self) -> usize {
        self.dim
    }

    /// `m` for the coordinate kind, `k = dim span{t_j}` for the orthogonal kind.
    pub fn target_dim(&self) -> usize {
        self.rows().len()
    }

    pub fn rank(&self) -> usize {
        match self.kind {
            MapKind::Coordinate => orthonormal_basis(&self.directions).len(),
            MapKind::Orthogonal => self.basis.len(),
        }
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    fn rows(&self) -> &[Vec<f64>] {
        match self.kind {
            MapKind::Coordinate => &self.directions,
            MapKind::Orthogonal => &self.basis,
        }
    }

    fn check(&self, x: &[f64]) -> Result<(), ProjectionError> {
        if x.len() != self.dim {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, ProjectionError> {
        self.check(x)?;
        Ok(self.apply_unchecked(x))
    }

    fn apply_unchecked(&self, x: &[f64]) -> Vec<f64> {
        self.rows().iter().map(|t| dot(x, t)).collect()
    }

    /// `ℙ_t x` as a vector of the ambient space (orthogonal kind), or the
    /// projection onto the span for the coordinate kind.
    pub fn ambient_projection(&self, x: &[f64]) -> Result<Vec<f64>, ProjectionError> {
        self.check(x)?;
        let basis = match self.kind {
            MapKind::Orthogonal => self.basis.clone(),
            MapKind::Coordinate => orthonormal_basis(&self.directions),
        };
        let mut y = vec![0.0; self.dim];
        for q in &basis {
            axpy(dot(x, q), q, &mut y);
        }
        Ok(y)
    }

    /// The matrix of the map, `target_dim × source_dim`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let rows = self.rows();
        DMatrix::from_fn(rows.len(), self.dim, |i, j| rows[i][j])
    }

    /// Operator norm by power iteration on `AᵀA` from a fixed pseudo-random
    /// start. For the coordinate kind this is at most `sqrt(m)`.
    pub fn operator_norm(&self) -> f64 {
        let a = self.matrix();
        if a.nrows() == 0 {
            return 0.0;
        }
        let ata = a.transpose() * &a;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v = DVector::from_fn(self.dim, |_, _| rng.random::<f64>() - 0.5);
        v /= v.norm();
        let mut estimate = 0.0;
        for _ in 0..10_000 {
            let w = &ata * &v;
            let n = w.norm();
            if n == 0.0 {
                return 0.0;
            }
            let next = w / n;
            let change = (&next - &v).norm();
            v = next;
            let rayleigh = v.dot(&(&ata * &v));
            if (rayleigh - estimate).abs() <= 1e-15 * rayleigh && change < 1e-12 {
                estimate = rayleigh;
                break;
            }
            estimate = rayleigh;
        }
        estimate.sqrt()
    }

    /// Radius bound for the image of a `τ`-ball: `τ sqrt(m)` for the
    /// coordinate kind and `τ` for the orthogonal kind.
    pub fn certified_radius(&self, tau: f64) -> f64 {
        match self.kind {
            MapKind::Coordinate => tau * (self.directions.len() as f64).sqrt(),
            MapKind::Orthogonal => tau,
        }
    }

    fn check_law(&self, found: usize) -> Result<(), ProjectionError> {
        if found != self.dim {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }

    /// Image law, with coinciding images merged on the `1e-12` grid.
    pub fn push_finite(&self, law: &FiniteLaw) -> Result<FiniteLaw, ProjectionError> {
        self.check_law(law.dimension())?;
        Ok(law.map_atoms(self.target_dim(), |x| self.apply_unchecked(x)))
    }

    /// `e_r(W)` maps to `e_r(W^A)`.
    pub fn push_compound_poisson(
        &self,
        law: &CompoundPoissonLaw,
    ) -> Result<CompoundPoissonLaw, ProjectionError> {
        Ok(CompoundPoissonLaw::new(self.push_finite(law.base())?, law.rate())?)
    }

    /// `N(μ, Σ)` maps to `N(Aμ, AΣAᵀ)`.
    pub fn push_gaussian(&self, law: &GaussianLaw) -> Result<GaussianLaw, ProjectionError> {
        self.check_law(law.dimension())?;
        let m = self.push_moments(&Moments {
            mean: law.mean().clone(),
            covariance: law.covariance().clone(),
        });
        let cov = (&m.covariance + m.covariance.transpose()) * 0.5;
        Ok(GaussianLaw::from_moments(&Moments {
            mean: m.mean,
            covariance: cov,
        })?)
    }

    /// Conjugated moments `(Aμ, AΣAᵀ)`.
    pub fn push_moments(&self, m: &Moments) -> Moments {
        let a = self.matrix();
        Moments {
            mean: &a * &m.mean,
            covariance: &a * &m.covariance * a.transpose(),
        }
    }

    pub fn push_component(&self, c: &Component) -> Result<Component, ProjectionError> {
        Ok(match c {
            Component::Finite(l) => Component::Finite(self.push_finite(l)?),
            Component::CompoundPoisson(l) => Component::CompoundPoisson(self.push_compound_poisson(l)?),
            Component::Gaussian(l) => Component::Gaussian(self.push_gaussian(l)?),
            Component::Shift(a) => Component::Shift(self.apply(a)?),
        })
    }

    /// Componentwise image of a convolution law.
    pub fn pushforward(&self, law: &ConvolutionLaw) -> Result<ConvolutionLaw, ProjectionError> {
        self.check_law(law.dimension())?;
        let components = law
            .components()
            .iter()
            .map(|c| self.push_component(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ConvolutionLaw::new(self.target_dim(), components)?)
    }

    /// `P̄` in the target space with `P = {x : 𝔸x ∈ P̄}` (orthogonal kind:
    /// normals written in the basis of `L_t`, offsets unchanged). Every normal
    /// of `p` must lie in `span{t_j}`.
    pub fn reduce_polyhedron(&self, p: &Polyhedron) -> Result<Polyhedron, ProjectionError> {
        if p.dimension() != self.dim {
            return Err(ProjectionError::DimensionMismatch {
                expected: self.dim,
                found: p.dimension(),
            });
        }
        if self.kind == MapKind::Coordinate {
            return self.box_polyhedron(p);
        }
        let mut normals = Vec::with_capacity(p.len());
        for (j, h) in p.halfspaces().iter().enumerate() {
            let bar = self.apply_unchecked(&h.normal);
            let residual = (1.0 - dot(&bar, &bar)).abs().sqrt();
            if residual > 1e-6 {
                return Err(ProjectionError::NotInSubspace { index: j, residual });
            }
            normals.push(bar);
        }
        let offsets = p.halfspaces().iter().map(|h| h.offset).collect();
        Ok(Polyhedron::new(normals, offsets)?.inflate(p.inflation())?)
    }

    /// For a coordinate map built on the normals of `p`: the box
    /// `{y : y_j <= b_j}` in `R^m`.
    pub fn box_polyhedron(&self, p: &Polyhedron) -> Result<Polyhedron, ProjectionError> {
        if self.kind != MapKind::Coordinate
            || p.len() != self.directions.len()
            || p.halfspaces().iter().zip(&self.directions).any(|(h, t)| &h.normal != t)
        {
            return Err(ProjectionError::NotCoordinate);
        }
        let m = p.len();
        let normals = (0..m)
            .map(|j| {
                let mut e = vec![0.0; m];
                e[j] = 1.0;
                e
            })
            .collect();
        let offsets = p.halfspaces().iter().map(|h| h.offset).collect();
        Ok(Polyhedron::new(normals, offsets)?.inflate(p.inflation())?)
    }
}

/// Largest absolute difference between two atomic (possibly sub-stochastic)
/// laws, identifying atoms within [`MATCH_TOL`] of each other.
pub fn max_pmf_deviation(a: &FiniteLaw, b: &FiniteLaw) -> f64 {
    let mut pts: Vec<(&[f64], f64)> = a.iter().chain(b.iter().map(|(x, w)| (x, -w))).collect();
    pts.sort_by(|p, q| lex_cmp(p.0, q.0));
    // Union-find over points within MATCH_TOL in every coordinate. Sorting by
    // the first coordinate bounds the candidate window.
    let n = pts.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if pts[j].0[0] - pts[i].0[0] > MATCH_TOL {
                break;
            }
            if pts[i].0.iter().zip(pts[j].0).all(|(x, y)| (x - y).abs() <= MATCH_TOL) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri] = rj;
            }
        }
    }
    let mut sums = vec![0.0; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        sums[r] += pts[i].1;
    }
    sums.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// Compares `(e(W))^A` with `e(W^A)` through exact pmfs truncated at
/// `tail_eps`, returning the largest pointwise difference.
pub fn verify_exponential_commutation(
    w: &FiniteLaw,
    map: &ProjectionMap,
    tail_eps: f64,
) -> Result<f64, ProjectionError> {
    verify_exponential_commutation_with_cap(w, map, tail_eps, DEFAULT_ATOM_CAP)
}

pub fn verify_exponential_commutation_with_cap(
    w: &FiniteLaw,
    map: &ProjectionMap,
    tail_eps: f64,
    cap: usize,
) -> Result<f64, ProjectionError> {
    let source = ConvolutionLaw::single(Component::CompoundPoisson(CompoundPoissonLaw::accompanying(
        w.clone(),
    )));
    let lhs = map.push_finite(&exact_pmf_with_cap(&source, tail_eps, cap)?)?;
    let pushed = ConvolutionLaw::single(Component::CompoundPoisson(CompoundPoissonLaw::accompanying(
        map.push_finite(w)?,
    )));
    let rhs = exact_pmf_with_cap(&pushed, tail_eps, cap)?;
    Ok(max_pmf_deviation(&lhs, &rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::HasMoments;

    #[test]
    fn standard_basis_coordinate_map_is_identity() {
        let dirs = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let m = ProjectionMap::new(dirs, MapKind::Coordinate).unwrap();
        assert_eq!(m.apply(&[1.5, -2.0, 3.0]).unwrap(), vec![1.5, -2.0, 3.0]);
        assert!((m.operator_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_directions_have_rank_one() {
        let m = ProjectionMap::new(vec![vec![1.0, 1.0], vec![2.0, 2.0]], MapKind::Orthogonal).unwrap();
        assert_eq!(m.rank(), 1);
        assert_eq!(m.target_dim(), 1);
    }

    #[test]
    fn zero_direction_is_rejected() {
        assert!(matches!(
            ProjectionMap::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], MapKind::Coordinate),
            Err(ProjectionError::ZeroDirection(1))
        ));
    }

    #[test]
    fn repeated_direction_attains_sqrt_m() {
        let m = ProjectionMap::new(vec![vec![0.6, 0.8]; 4], MapKind::Coordinate).unwrap();
        assert!((m.operator_norm() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_images_merge() {
        let law = FiniteLaw::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let m = ProjectionMap::new(vec![vec![0.0, 1.0]], MapKind::Coordinate).unwrap();
        let pushed = m.push_finite(&law).unwrap();
        assert_eq!(pushed.len(), 1);
        assert_eq!(pushed.atom(0), &[0.0]);
        assert_eq!(pushed.weights(), &[1.0]);
    }

    #[test]
    fn point_mass_pushes_to_point_mass() {
        let m = ProjectionMap::new(vec![vec![1.0, 2.0], vec![0.0, 1.0]], MapKind::Coordinate).unwrap();
        let x = [0.25, 0.5];
        let pushed = m.push_finite(&FiniteLaw::point_mass(x.to_vec())).unwrap();
        // Images are stored on the 1e-12 merge grid.
        for (a, b) in pushed.atom(0).iter().zip(m.apply(&x).unwrap()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_jump_commutation_is_exact() {
        let m = ProjectionMap::new(vec![vec![1.0, 0.0, 1.0]], MapKind::Coordinate).unwrap();
        assert_eq!(verify_exponential_commutation(&FiniteLaw::zero(3), &m, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_moments_are_conjugated() {
        let g = GaussianLaw::new(vec![1.0, 2.0], vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = ProjectionMap::new(vec![vec![1.0, 0.0], vec![0.6, 0.8]], MapKind::Coordinate).unwrap();
        let pushed = m.push_gaussian(&g).unwrap().moments();
        assert!((pushed.mean[1] - (0.6 + 1.6)).abs() < 1e-12);
        let v = 0.36 * 2.0 + 2.0 * 0.48 * 0.5 + 0.64 * 1.0;
        assert!((pushed.covariance[(1, 1)] - v).abs() < 1e-12);
    }

    #[test]
    fn map_json_round_trip() {
        let m = ProjectionMap::new(vec![vec![3.0, 4.0]], MapKind::Orthogonal).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"directions":[[0.6,0.8]],"kind":"orthogonal"}"#);
        assert_eq!(serde_json::from_str::<ProjectionMap>(&s).unwrap(), m);
    }

    #[test]
    fn box_polyhedron_events_match() {
        let p = Polyhedron::new(vec![vec![1.0, 1.0], vec![1.0, -2.0]], vec![0.5, 1.0]).unwrap();
        let m = ProjectionMap::from_polyhedron(&p, MapKind::Coordinate).unwrap();
        let b = m.box_polyhedron(&p).unwrap();
        for x in [[0.0, 0.0], [1.0, 0.0], [-3.0, 1.0], [0.2, 0.3]] {
            assert_eq!(p.contains(&x).unwrap(), b.contains(&m.apply(&x).unwrap()).unwrap());
        }
    }
}
