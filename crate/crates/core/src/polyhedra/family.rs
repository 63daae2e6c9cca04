use rand::Rng;
use rand_distr::StandardNormal;

use super::{Polyhedron, PolyhedronError};
use crate::linalg::{dot, norm};
use crate::rng::RngStream;

/// How offsets of random polyhedra are chosen.
#[derive(Debug, Clone, Copy)]
pub enum OffsetMode<'a> {
    /// Each offset is drawn uniformly from the grid.
    FixedGrid(&'a [f64]),
    /// Each offset is a uniformly chosen order statistic of `<x, t_j>`
    /// over the samples.
    Quantiles(&'a [Vec<f64>]),
}

fn unit_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// `count` random polyhedra in `R^d` with `m` halfspaces each and normals
/// uniform on the sphere.
pub fn random_family(
    m: usize,
    d: usize,
    count: usize,
    stream: RngStream,
    mode: OffsetMode<'_>,
) -> Result<Vec<Polyhedron>, PolyhedronError> {
    if m == 0 || d == 0 || count == 0 {
        return Err(PolyhedronError::InvalidParameter(format!(
            "m = {m}, d = {d}, count = {count} must all be positive"
        )));
    }
    match mode {
        OffsetMode::FixedGrid(grid) if grid.is_empty() => {
            return Err(PolyhedronError::InvalidParameter("empty offset grid".into()))
        }
        OffsetMode::Quantiles(samples) => {
            if samples.is_empty() {
                return Err(PolyhedronError::InvalidParameter("no samples for quantiles".into()));
            }
            if let Some(s) = samples.iter().find(|s| s.len() != d) {
                return Err(PolyhedronError::DimensionMismatch {
                    expected: d,
                    found: s.len(),
                });
            }
        }
        _ => {}
    }
    let mut rng = stream.rng();
    let mut projected = Vec::new();
    let mut family = Vec::with_capacity(count);
    for _ in 0..count {
        let mut normals = Vec::with_capacity(m);
        let mut offsets = Vec::with_capacity(m);
        for _ in 0..m {
            let t = unit_vector(&mut rng, d);
            let b = match mode {
                OffsetMode::FixedGrid(grid) => grid[rng.random_range(0..grid.len())],
                OffsetMode::Quantiles(samples) => {
                    projected.clear();
                    projected.extend(samples.iter().map(|x| dot(x, &t)));
                    let k = rng.random_range(0..projected.len());
                    *projected.select_nth_unstable_by(k, f64::total_cmp).1
                }
            };
            normals.push(t);
            offsets.push(b);
        }
        family.push(Polyhedron::new(normals, offsets)?);
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_halfspace_has_unit_normal() {
        let fam = random_family(1, 5, 1, RngStream::new(3, 0), OffsetMode::FixedGrid(&[0.0])).unwrap();
        assert_eq!(fam.len(), 1);
        assert!((norm(fam[0].normal(0)) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quantile_offsets_are_projected_samples() {
        let samples: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 * 0.1, (i * i) as f64 * 0.01]).collect();
        let fam = random_family(2, 2, 10, RngStream::new(1, 1), OffsetMode::Quantiles(&samples)).unwrap();
        for p in &fam {
            for j in 0..p.len() {
                let t = p.normal(j);
                assert!(samples.iter().any(|x| dot(x, t) == p.offset(j)));
            }
        }
    }

    #[test]
    fn same_stream_same_family() {
        let grid = [-1.0, 0.0, 1.0];
        let a = random_family(3, 3, 20, RngStream::new(5, 2), OffsetMode::FixedGrid(&grid)).unwrap();
        let b = random_family(3, 3, 20, RngStream::new(5, 2), OffsetMode::FixedGrid(&grid)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_count_is_rejected() {
        assert!(random_family(1, 1, 0, RngStream::new(0, 0), OffsetMode::FixedGrid(&[0.0])).is_err());
    }
}
