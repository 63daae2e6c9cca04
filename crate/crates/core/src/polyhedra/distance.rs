//! Euclidean projection onto a polyhedron.
//!
//! For up to [`ENUMERATION_LIMIT`] finite halfspaces the projection is found
//! exactly by enumerating candidate active sets of linearly independent
//! normals and checking the KKT conditions. Larger systems run Dykstra's
//! cyclic projections (Hildreth's method for halfspaces) followed by an
//! active-set polish.

use super::{Polyhedron, PolyhedronError};
use crate::linalg::{axpy, dist, dot, norm, solve_small};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Sweep cap for the iterative path.
pub const MAX_ITERATIONS: usize = 10_000;
/// Largest number of finite halfspaces handled by exact enumeration.
pub const ENUMERATION_LIMIT: usize = 10;

struct Constraints<'a> {
    normals: Vec<&'a [f64]>,
    offsets: Vec<f64>,
}

impl Constraints<'_> {
    fn violation(&self, y: &[f64]) -> f64 {
        self.normals
            .iter()
            .zip(&self.offsets)
            .map(|(t, b)| dot(y, t) - b)
            .fold(0.0, f64::max)
    }
}

/// Returns `(dist(x, P), projection of x)`.
pub(super) fn distance(
    p: &Polyhedron,
    x: &[f64],
    tol: f64,
) -> Result<(f64, Vec<f64>), PolyhedronError> {
    let idx: Vec<usize> = p.finite_indices().collect();
    let c = Constraints {
        normals: idx.iter().map(|&j| p.normal(j)).collect(),
        offsets: idx.iter().map(|&j| p.offset(j)).collect(),
    };
    if c.violation(x) <= 0.0 {
        return Ok((0.0, x.to_vec()));
    }
    if c.normals.len() == 1 {
        let r = dot(x, c.normals[0]) - c.offsets[0];
        let mut y = x.to_vec();
        axpy(-r, c.normals[0], &mut y);
        return Ok((r, y));
    }
    if c.normals.len() <= ENUMERATION_LIMIT {
        if let Some(y) = enumerate(&c, x) {
            return Ok((dist(x, &y), y));
        }
    }
    let y = dykstra(&c, x, tol)?;
    Ok((dist(x, &y), y))
}

fn feasibility_tol(c: &Constraints, x: &[f64]) -> f64 {
    let scale = c
        .offsets
        .iter()
        .map(|b| b.abs())
        .fold(norm(x), f64::max);
    1e-11 * (1.0 + scale)
}

/// Projection of `x` onto `{y : <y, t_j> = b_j, j in set}` together with the
/// multipliers, or `None` if the normals in `set` are dependent.
fn affine_projection(c: &Constraints, x: &[f64], set: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let g: Vec<Vec<f64>> = set
        .iter()
        .map(|&i| set.iter().map(|&j| dot(c.normals[i], c.normals[j])).collect())
        .collect();
    let r: Vec<f64> = set
        .iter()
        .map(|&i| dot(x, c.normals[i]) - c.offsets[i])
        .collect();
    let mu = solve_small(&g, &r)?;
    let mut y = x.to_vec();
    for (&i, &m) in set.iter().zip(&mu) {
        axpy(-m, c.normals[i], &mut y);
    }
    Some((y, mu))
}

/// Tries every active set of size `1..=min(d, m)` in order of size. By
/// Carathéodory the projection always has a KKT certificate supported on
/// independent normals, so a nonempty polyhedron always yields a hit.
fn enumerate(c: &Constraints, x: &[f64]) -> Option<Vec<f64>> {
    let m = c.normals.len();
    let d = x.len();
    let ftol = feasibility_tol(c, x);
    let mut set = Vec::with_capacity(d);
    for k in 1..=d.min(m) {
        if let Some(y) = subsets(c, x, m, k, 0, &mut set, ftol) {
            return Some(y);
        }
    }
    None
}

fn subsets(
    c: &Constraints,
    x: &[f64],
    m: usize,
    k: usize,
    start: usize,
    set: &mut Vec<usize>,
    ftol: f64,
) -> Option<Vec<f64>> {
    if set.len() == k {
        let (y, mu) = affine_projection(c, x, set)?;
        let mu_floor = -1e-12 * (1.0 + mu.iter().map(|v| v.abs()).fold(0.0, f64::max));
        if mu.iter().all(|&v| v >= mu_floor) && c.violation(&y) <= ftol {
            return Some(y);
        }
        return None;
    }
    for j in start..m {
        set.push(j);
        let found = subsets(c, x, m, k, j + 1, set, ftol);
        set.pop();
        if found.is_some() {
            return found;
        }
    }
    None
}

fn dykstra(c: &Constraints, x: &[f64], tol: f64) -> Result<Vec<f64>, PolyhedronError> {
    let m = c.normals.len();
    let mut y = x.to_vec();
    let mut z = vec![0.0; m];
    let mut prev = y.clone();
    for sweep in 1..=MAX_ITERATIONS {
        for j in 0..m {
            let t = c.normals[j];
            axpy(z[j], t, &mut y);
            let s = dot(&y, t) - c.offsets[j];
            if s > 0.0 {
                axpy(-s, t, &mut y);
                z[j] = s;
            } else {
                z[j] = 0.0;
            }
        }
        let step = dist(&y, &prev);
        if step <= tol * 1e-2 && c.violation(&y) <= tol {
            return Ok(polish(c, x, &z).unwrap_or(y));
        }
        if sweep == MAX_ITERATIONS {
            let residual = c.violation(&y);
            if residual > 1e-6 * (1.0 + norm(x)) {
                return Err(PolyhedronError::Infeasible);
            }
            return Err(PolyhedronError::NonConvergence {
                iterations: sweep,
                residual: residual.max(step),
            });
        }
        prev.clone_from(&y);
    }
    unreachable!()
}

/// Re-solves on the active set suggested by the Dykstra multipliers.
fn polish(c: &Constraints, x: &[f64], z: &[f64]) -> Option<Vec<f64>> {
    let active: Vec<usize> = (0..z.len()).filter(|&j| z[j] > 0.0).collect();
    if active.is_empty() || active.len() > x.len() {
        return None;
    }
    let (y, mu) = affine_projection(c, x, &active)?;
    (mu.iter().all(|&v| v >= 0.0) && c.violation(&y) <= feasibility_tol(c, x)).then_some(y)
}
