//! Planar cut augmentation: extra halfspaces that make the inflation of a
//! polygon a `(1+ε)`-neighbourhood.
//!
//! At a vertex `v`, the points whose projection onto `P` is `v` form
//! `v + N(v)`, where `N(v)` is the normal cone. If consecutive normals in
//! `N(v)` are at most `g` apart, the inflated constraints confine `x - v` to
//! a region of radius `λ / cos(g/2)`. Cuts with `b = <v, t>` are added along
//! each gap wider than `2 acos(1/(1+ε))`, splitting it evenly.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::{HalfSpace, Polyhedron, PolyhedronError};
use crate::linalg::dot;

/// A polyhedron with extra halfspaces, each containing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPolyhedron {
    pub base: Polyhedron,
    pub cuts: Vec<HalfSpace>,
    pub epsilon: f64,
}

impl AugmentedPolyhedron {
    /// Total number of halfspaces `m0 = m + cuts`.
    pub fn m0(&self) -> usize {
        self.base.len() + self.cuts.len()
    }

    /// All `m0` halfspaces as one polyhedron (equal to `base` as a set).
    pub fn as_polyhedron(&self) -> Polyhedron {
        let mut hs = self.base.flattened().halfspaces().to_vec();
        hs.extend(self.cuts.iter().cloned());
        Polyhedron::from_halfspaces(hs).expect("cuts share the base dimension")
    }

    /// Inflation of all `m0` offsets by `λ`.
    pub fn inflate(&self, lambda: f64) -> Result<Polyhedron, PolyhedronError> {
        self.as_polyhedron().inflate(lambda)
    }
}

/// Largest angle between consecutive normals that keeps the inflation
/// within a factor `1 + ε` of the neighbourhood.
pub fn max_gap_for(epsilon: f64) -> f64 {
    2.0 * (1.0 / (1.0 + epsilon)).acos()
}

fn require_planar(p: &Polyhedron) -> Result<(), PolyhedronError> {
    if p.dimension() != 2 {
        return Err(PolyhedronError::UnsupportedDimension(p.dimension()));
    }
    Ok(())
}

fn activity_tol(v: &[f64], b: f64) -> f64 {
    1e-9 * (1.0 + v[0].abs().max(v[1].abs()).max(b.abs()))
}

/// Finite halfspaces with duplicate directions merged (keeping the tightest).
fn merged_constraints(p: &Polyhedron) -> Vec<(f64, [f64; 2], f64)> {
    let mut out: Vec<(f64, [f64; 2], f64)> = Vec::new();
    for j in p.finite_indices() {
        let t = p.normal(j);
        let b = p.offset(j);
        let angle = t[1].atan2(t[0]).rem_euclid(TAU);
        match out
            .iter_mut()
            .find(|(_, s, _)| (s[0] - t[0]).abs() <= 1e-12 && (s[1] - t[1]).abs() <= 1e-12)
        {
            Some(entry) => entry.2 = entry.2.min(b),
            None => out.push((angle, [t[0], t[1]], b)),
        }
    }
    out
}

/// Vertices of a planar polyhedron, sorted lexicographically.
pub fn vertices_2d(p: &Polyhedron) -> Result<Vec<[f64; 2]>, PolyhedronError> {
    require_planar(p)?;
    let cons = merged_constraints(p);
    let mut verts: Vec<[f64; 2]> = Vec::new();
    for i in 0..cons.len() {
        for j in i + 1..cons.len() {
            let (_, a, ba) = cons[i];
            let (_, c, bc) = cons[j];
            let det = a[0] * c[1] - a[1] * c[0];
            if det.abs() <= 1e-12 {
                continue;
            }
            let v = [(ba * c[1] - bc * a[1]) / det, (a[0] * bc - c[0] * ba) / det];
            let feasible = cons
                .iter()
                .all(|(_, t, b)| dot(&v, t) - b <= activity_tol(&v, *b));
            if feasible
                && !verts
                    .iter()
                    .any(|w| (w[0] - v[0]).abs() <= 1e-9 && (w[1] - v[1]).abs() <= 1e-9)
            {
                verts.push(v);
            }
        }
    }
    verts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    Ok(verts)
}

/// Angular gaps inside the normal cone spanned by the given angles, as
/// `(start angle, width)`. The cone is the circle minus its largest gap
/// when that gap is at least `π`, and the whole circle otherwise.
fn cone_gaps(mut angles: Vec<f64>) -> Vec<(f64, f64)> {
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    if angles.len() < 2 {
        return Vec::new();
    }
    let n = angles.len();
    let gaps: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let next = if k + 1 < n { angles[k + 1] } else { angles[0] + TAU };
            (angles[k], next - angles[k])
        })
        .collect();
    let (widest, &(_, w)) = gaps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("nonempty");
    if w >= PI - 1e-12 {
        gaps.into_iter()
            .enumerate()
            .filter(|&(k, _)| k != widest)
            .map(|(_, g)| g)
            .collect()
    } else {
        gaps
    }
}

/// Adds cut halfspaces so that `inflate(augmented, λ) ⊆ P^{(1+ε)λ}` for
/// every `λ > 0`. Only planar polyhedra are supported.
pub fn augment_cuts(p: &Polyhedron, epsilon: f64) -> Result<AugmentedPolyhedron, PolyhedronError> {
    require_planar(p)?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(PolyhedronError::InvalidParameter(format!("epsilon = {epsilon}")));
    }
    if !p.is_feasible()? {
        return Err(PolyhedronError::DegenerateInput("empty polyhedron".into()));
    }
    let gmax = max_gap_for(epsilon);
    let cons = merged_constraints(p);
    let mut cuts = Vec::new();
    for v in vertices_2d(p)? {
        let active: Vec<f64> = cons
            .iter()
            .filter(|(_, t, b)| (dot(&v, t) - b).abs() <= activity_tol(&v, *b))
            .map(|(angle, _, _)| *angle)
            .collect();
        for (start, width) in cone_gaps(active) {
            if width <= gmax {
                continue;
            }
            let pieces = (width / gmax).ceil() as usize;
            for i in 1..pieces {
                let theta = start + width * i as f64 / pieces as f64;
                let t = vec![theta.cos(), theta.sin()];
                let b = dot(&v, &t);
                cuts.push(HalfSpace { normal: t, offset: b });
            }
        }
    }
    Ok(AugmentedPolyhedron {
        base: p.clone(),
        cuts,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyhedra::DEFAULT_TOL;

    fn corner() -> Polyhedron {
        Polyhedron::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap()
    }

    #[test]
    fn single_halfspace_needs_no_cuts() {
        let p = Polyhedron::new(vec![vec![1.0, 1.0]], vec![0.3]).unwrap();
        assert!(augment_cuts(&p, 0.01).unwrap().cuts.is_empty());
    }

    #[test]
    fn right_angle_gets_one_bisector_cut() {
        let aug = augment_cuts(&corner(), 0.09).unwrap();
        assert_eq!(aug.cuts.len(), 1);
        let t = &aug.cuts[0].normal;
        let s = 0.5f64.sqrt();
        assert!((t[0] - s).abs() < 1e-12 && (t[1] - s).abs() < 1e-12);
        assert!(aug.cuts[0].offset.abs() < 1e-15);
    }

    #[test]
    fn corner_ratio_is_secant_of_eighth_turn() {
        let aug = augment_cuts(&corner(), 0.09).unwrap();
        let lambda = 0.7;
        let inflated = aug.inflate(lambda).unwrap();
        let p = corner();
        let worst = vertices_2d(&inflated)
            .unwrap()
            .iter()
            .map(|v| p.distance_to(v, DEFAULT_TOL).unwrap() / lambda)
            .fold(0.0, f64::max);
        assert!((worst - (4.0 - 2.0 * 2f64.sqrt()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn three_dimensions_are_unsupported() {
        let p = Polyhedron::new(vec![vec![1.0, 0.0, 0.0]], vec![0.0]).unwrap();
        assert_eq!(augment_cuts(&p, 0.1), Err(PolyhedronError::UnsupportedDimension(3)));
    }

    #[test]
    fn empty_polygon_is_degenerate() {
        let p = Polyhedron::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![-1.0, -1.0]).unwrap();
        assert!(matches!(augment_cuts(&p, 0.1), Err(PolyhedronError::DegenerateInput(_))));
    }

    #[test]
    fn duplicate_normals_are_merged() {
        let p = Polyhedron::new(
            vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let v = vertices_2d(&p).unwrap();
        assert_eq!(v, vec![[0.0, 0.0]]);
    }

    #[test]
    fn narrow_wedge_needs_more_cuts_as_it_sharpens() {
        let mut last = 0;
        for theta in [1.0f64, 0.3, 0.1, 0.03] {
            let p = Polyhedron::new(
                vec![vec![0.0, 1.0], vec![theta.sin(), -theta.cos()]],
                vec![0.0, 0.0],
            )
            .unwrap();
            let aug = augment_cuts(&p, 0.05).unwrap();
            assert!(aug.cuts.len() >= last);
            last = aug.cuts.len();
            for c in &aug.cuts {
                for v in vertices_2d(&p).unwrap() {
                    assert!(dot(&v, &c.normal) <= c.offset + 1e-12);
                }
            }
        }
        assert!(last > 0);
    }

    #[test]
    fn full_cone_at_a_point_polygon() {
        let p = Polyhedron::new(
            vec![vec![1.0, 0.0], vec![-0.5, 0.8], vec![-0.5, -0.8]],
            vec![0.0, 0.0, 0.0],
        )
        .unwrap();
        let aug = augment_cuts(&p, 0.1).unwrap();
        let gmax = max_gap_for(0.1);
        let mut angles: Vec<f64> = p
            .halfspaces()
            .iter()
            .chain(&aug.cuts)
            .map(|h| h.normal[1].atan2(h.normal[0]).rem_euclid(TAU))
            .collect();
        angles.sort_by(f64::total_cmp);
        for w in angles.windows(2) {
            assert!(w[1] - w[0] <= gmax + 1e-12);
        }
        assert!(angles[0] + TAU - angles[angles.len() - 1] <= gmax + 1e-12);
    }
}
