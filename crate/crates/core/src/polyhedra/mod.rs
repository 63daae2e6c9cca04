//! Convex polyhedra `P = {x : <x, t_j> <= b_j, j = 1..m}` with unit normals.
//!
//! Two enlargements are provided:
//!
//! - the inflation `P_λ`, which raises every offset by `λ`
//!   ([`Polyhedron::inflate`]);
//! - the Euclidean neighbourhood `P^λ = {x : dist(x, P) <= λ}`
//!   ([`Polyhedron::in_neighborhood`], built on [`Polyhedron::distance_to`]).
//!
//! Unit normals give `P^λ ⊆ P_λ`. For a single halfspace the two coincide.
//! Offsets may be `+∞`; such halfspaces are the whole space and are skipped.

mod cuts;
mod distance;
mod family;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dot, norm};

pub use cuts::{augment_cuts, max_gap_for, vertices_2d, AugmentedPolyhedron};
pub use distance::{DEFAULT_TOL, ENUMERATION_LIMIT, MAX_ITERATIONS};
pub use family::{random_family, OffsetMode};

/// Allowed deviation of a stored normal from unit length.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyhedronError {
    #[error("normal {0} is zero")]
    ZeroNormal(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("offset {0} is not allowed (must be finite or +inf)")]
    InvalidOffset(f64),
    #[error("polyhedron is empty")]
    Infeasible,
    #[error("projection did not converge after {iterations} sweeps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("exact cut construction is only available for d = 2, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// The closed halfspace `{x : <x, normal> <= offset}` with a unit normal.
/// An offset of `+∞` denotes the whole space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    #[serde(with = "offset_serde")]
    pub offset: f64,
}

impl HalfSpace {
    /// Normalises `normal`, scaling `offset` by the same factor.
    pub fn new(normal: Vec<f64>, offset: f64) -> Result<Self, PolyhedronError> {
        if offset.is_nan() || offset == f64::NEG_INFINITY {
            return Err(PolyhedronError::InvalidOffset(offset));
        }
        let r = norm(&normal);
        if !(r > 0.0 && r.is_finite()) {
            return Err(PolyhedronError::ZeroNormal(0));
        }
        if (r - 1.0).abs() <= UNIT_TOL {
            return Ok(Self { normal, offset });
        }
        Ok(Self {
            normal: normal.into_iter().map(|v| v / r).collect(),
            offset: offset / r,
        })
    }

    pub fn is_whole_space(&self) -> bool {
        self.offset == f64::INFINITY
    }
}

/// A convex polyhedron in `R^d` given by `m >= 1` halfspaces, possibly
/// inflated by a total amount `inflation >= 0`.
///
/// The effective offsets are `b_j + inflation`. Keeping the inflation
/// separate makes `P_{a+b}` and `(P_a)_b` share their representation
/// bit-for-bit when `a + b` is computed the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolyhedronRepr", into = "PolyhedronRepr")]
pub struct Polyhedron {
    dim: usize,
    halfspaces: Vec<HalfSpace>,
    inflation: f64,
}

#[derive(Serialize, Deserialize)]
struct PolyhedronRepr {
    normals: Vec<Vec<f64>>,
    #[serde(with = "offsets_serde")]
    offsets: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    inflation: f64,
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}

impl TryFrom<PolyhedronRepr> for Polyhedron {
    type Error = PolyhedronError;
    fn try_from(r: PolyhedronRepr) -> Result<Self, Self::Error> {
        Polyhedron::new(r.normals, r.offsets)?.inflate(r.inflation)
    }
}

impl From<Polyhedron> for PolyhedronRepr {
    fn from(p: Polyhedron) -> Self {
        PolyhedronRepr {
            normals: p.halfspaces.iter().map(|h| h.normal.clone()).collect(),
            offsets: p.halfspaces.iter().map(|h| h.offset).collect(),
            inflation: p.inflation,
        }
    }
}

impl Polyhedron {
    /// `make_polyhedron`: normals are renormalised to unit length and the
    /// offsets scaled accordingly.
    pub fn new(normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self, PolyhedronError> {
        if normals.is_empty() {
            return Err(PolyhedronError::InvalidParameter("m must be at least 1".into()));
        }
        if normals.len() != offsets.len() {
            return Err(PolyhedronError::InvalidParameter(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        let dim = normals[0].len();
        if dim == 0 {
            return Err(PolyhedronError::InvalidParameter("dimension must be positive".into()));
        }
        let mut halfspaces = Vec::with_capacity(normals.len());
        for (j, (t, b)) in normals.into_iter().zip(offsets).enumerate() {
            if t.len() != dim {
                return Err(PolyhedronError::DimensionMismatch {
                    expected: dim,
                    found: t.len(),
                });
            }
            let h = HalfSpace::new(t, b).map_err(|e| match e {
                PolyhedronError::ZeroNormal(_) => PolyhedronError::ZeroNormal(j),
                other => other,
            })?;
            halfspaces.push(h);
        }
        Ok(Self {
            dim,
            halfspaces,
            inflation: 0.0,
        })
    }

    pub fn from_halfspaces(halfspaces: Vec<HalfSpace>) -> Result<Self, PolyhedronError> {
        let (normals, offsets) = halfspaces.into_iter().map(|h| (h.normal, h.offset)).unzip();
        Self::new(normals, offsets)
    }

    /// The whole space `R^d`, written as one halfspace with offset `+∞`.
    pub fn whole_space(dim: usize) -> Self {
        let mut t = vec![0.0; dim];
        t[0] = 1.0;
        Self::new(vec![t], vec![f64::INFINITY]).expect("valid")
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    /// Number of halfspaces `m` (including any with offset `+∞`).
    pub fn len(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halfspaces.is_empty()
    }

    /// The halfspaces before inflation.
    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    pub fn normal(&self, j: usize) -> &[f64] {
        &self.halfspaces[j].normal
    }

    pub fn inflation(&self) -> f64 {
        self.inflation
    }

    /// Offset `b_j + inflation` of halfspace `j`.
    #[inline]
    pub fn offset(&self, j: usize) -> f64 {
        self.halfspaces[j].offset + self.inflation
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.offset(j)).collect()
    }

    /// Indices of halfspaces with a finite offset.
    pub fn finite_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&j| self.halfspaces[j].offset.is_finite())
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), PolyhedronError> {
        if x.len() != self.dim {
            return Err(PolyhedronError::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Closed membership: `<x, t_j> <= b_j` for every `j`.
    pub fn contains(&self, x: &[f64]) -> Result<bool, PolyhedronError> {
        self.check_dim(x)?;
        Ok(self.contains_unchecked(x))
    }

    #[inline]
    pub(crate) fn contains_unchecked(&self, x: &[f64]) -> bool {
        self.halfspaces
            .iter()
            .all(|h| dot(x, &h.normal) <= h.offset + self.inflation)
    }

    /// `max_j (<x, t_j> - b_j)` over finite offsets (the smallest `λ` with
    /// `x ∈ P_λ` when positive); `-∞` if every offset is infinite.
    pub fn slack_key(&self, x: &[f64]) -> f64 {
        self.halfspaces
            .iter()
            .filter(|h| h.offset.is_finite())
            .map(|h| dot(x, &h.normal) - (h.offset + self.inflation))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `P_λ`: every offset raised by `λ`.
    pub fn inflate(&self, lambda: f64) -> Result<Polyhedron, PolyhedronError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(PolyhedronError::NegativeLambda(lambda));
        }
        Ok(Polyhedron {
            dim: self.dim,
            halfspaces: self.halfspaces.clone(),
            inflation: self.inflation + lambda,
        })
    }

    /// The same polyhedron with its inflation folded into the offsets.
    pub fn flattened(&self) -> Polyhedron {
        Polyhedron {
            dim: self.dim,
            halfspaces: self
                .halfspaces
                .iter()
                .map(|h| HalfSpace {
                    normal: h.normal.clone(),
                    offset: h.offset + self.inflation,
                })
                .collect(),
            inflation: 0.0,
        }
    }

    /// Euclidean distance from `x` to `P`, within `tol`.
    pub fn distance_to(&self, x: &[f64], tol: f64) -> Result<f64, PolyhedronError> {
        self.check_dim(x)?;
        distance::distance(self, x, tol).map(|(d, _)| d)
    }

    /// The nearest point of `P` to `x`.
    pub fn project(&self, x: &[f64], tol: f64) -> Result<Vec<f64>, PolyhedronError> {
        self.check_dim(x)?;
        distance::distance(self, x, tol).map(|(_, y)| y)
    }

    /// A point of `P`, or `Infeasible`.
    pub fn feasible_point(&self) -> Result<Vec<f64>, PolyhedronError> {
        self.project(&vec![0.0; self.dim], DEFAULT_TOL)
    }

    pub fn is_feasible(&self) -> Result<bool, PolyhedronError> {
        match self.feasible_point() {
            Ok(_) => Ok(true),
            Err(PolyhedronError::Infeasible) => Ok(false),
            Err(e) => Err(e),
        }
    }

    /// Membership in `P^λ`: `dist(x, P) <= λ + tol`.
    ///
    /// Points outside `P_λ` are rejected without a projection, and when at
    /// most one offset is finite the answer is the `P_λ` test itself, since
    /// the two sets then coincide.
    pub fn in_neighborhood(&self, x: &[f64], lambda: f64, tol: f64) -> Result<bool, PolyhedronError> {
        self.check_dim(x)?;
        if lambda < 0.0 {
            return Err(PolyhedronError::NegativeLambda(lambda));
        }
        let key = self.slack_key(x);
        if key <= 0.0 {
            return Ok(true);
        }
        if self.finite_indices().count() <= 1 || key > lambda {
            return Ok(key <= lambda);
        }
        Ok(distance::distance(self, x, tol)?.0 <= lambda + tol)
    }
}

mod offset_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum Offset {
        Finite(f64),
        Sentinel(String),
    }

    impl Offset {
        pub(super) fn from_f64(v: f64) -> Self {
            if v == f64::INFINITY {
                Offset::Sentinel("inf".into())
            } else {
                Offset::Finite(v)
            }
        }

        pub(super) fn into_f64<E: serde::de::Error>(self) -> Result<f64, E> {
            match self {
                Offset::Finite(v) => Ok(v),
                Offset::Sentinel(s) if s == "inf" || s == "+inf" => Ok(f64::INFINITY),
                Offset::Sentinel(s) => Err(E::custom(format!("unknown offset sentinel {s:?}"))),
            }
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        Offset::from_f64(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Offset::deserialize(d)?.into_f64()
    }
}

mod offsets_serde {
    use super::offset_serde::Offset;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&b| Offset::from_f64(b))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<Offset>::deserialize(d)?
            .into_iter()
            .map(Offset::into_f64)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corner() -> Polyhedron {
        Polyhedron::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn normals_are_renormalised() {
        let p = Polyhedron::new(vec![vec![2.0, 0.0]], vec![4.0]).unwrap();
        assert_eq!(p.normal(0), &[1.0, 0.0]);
        assert_eq!(p.offset(0), 2.0);
    }

    #[test]
    fn zero_normal_is_rejected() {
        let err = Polyhedron::new(vec![vec![1.0, 0.0], vec![0.0, 0.0]], vec![0.0, 1.0]).unwrap_err();
        assert_eq!(err, PolyhedronError::ZeroNormal(1));
    }

    #[test]
    fn infinite_offset_is_whole_space() {
        let p = Polyhedron::new(vec![vec![0.0, 1.0]], vec![f64::INFINITY]).unwrap();
        assert!(p.contains(&[1e300, 1e300]).unwrap());
        assert_eq!(p.distance_to(&[5.0, 5.0], DEFAULT_TOL).unwrap(), 0.0);
    }

    #[test]
    fn closed_membership() {
        let p = corner();
        assert!(p.contains(&[0.0, 0.0]).unwrap());
        assert!(p.contains(&[0.0, -3.0]).unwrap());
        assert!(!p.contains(&[0.1, -1.0]).unwrap());
        assert!(p.contains(&[0.0]).is_err());
    }

    #[test]
    fn inflation_exceeds_neighbourhood_at_corner() {
        let p = corner();
        let p1 = p.inflate(1.0).unwrap();
        assert!(p1.contains(&[1.0, 1.0]).unwrap());
        let d = p.distance_to(&[1.0, 1.0], DEFAULT_TOL).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
        assert!(!p.in_neighborhood(&[1.0, 1.0], 1.0, DEFAULT_TOL).unwrap());
    }

    #[test]
    fn inflate_zero_is_identity_and_negative_fails() {
        let p = corner();
        assert_eq!(p.inflate(0.0).unwrap(), p);
        assert_eq!(p.inflate(-1.0), Err(PolyhedronError::NegativeLambda(-1.0)));
    }

    #[test]
    fn inflations_compose() {
        let p = corner();
        let (a, b) = (0.1, 0.2);
        assert_eq!(p.inflate(a + b).unwrap(), p.inflate(a).unwrap().inflate(b).unwrap());
    }

    #[test]
    fn json_round_trip_with_sentinel() {
        let p = Polyhedron::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![1.5, f64::INFINITY]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"normals":[[1.0,0.0],[0.0,1.0]],"offsets":[1.5,"inf"]}"#);
        let back: Polyhedron = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Polyhedron>(r#"{"normals":[[1.0]],"offsets":["-inf"]}"#).is_err());
    }

    #[test]
    fn single_halfspace_neighbourhood_matches_inflation() {
        let p = Polyhedron::new(vec![vec![3.0, 4.0]], vec![1.0]).unwrap();
        for x in [[1.0, 1.0], [0.3, 0.1], [-2.0, 5.0]] {
            for lambda in [0.0, 0.1, 1.0, 2.5] {
                assert_eq!(
                    p.in_neighborhood(&x, lambda, DEFAULT_TOL).unwrap(),
                    p.inflate(lambda).unwrap().contains(&x).unwrap()
                );
            }
        }
    }
}
