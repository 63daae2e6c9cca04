use accompany_lab::polyhedra::{augment_cuts, vertices_2d, Polyhedron, DEFAULT_TOL};
use proptest::prelude::*;

fn unit(v: &[f64]) -> Option<Vec<f64>> {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (r > 1e-3).then(|| v.iter().map(|x| x / r).collect())
}

fn polyhedron(d: usize, max_m: usize) -> impl Strategy<Value = Polyhedron> {
    prop::collection::vec((prop::collection::vec(-1.0f64..1.0, d), -1.0f64..1.0), 1..=max_m).prop_filter_map(
        "nonzero normals",
        move |hs| {
            let mut normals = Vec::new();
            let mut offsets = Vec::new();
            for (n, b) in hs {
                normals.push(unit(&n)?);
                offsets.push(b);
            }
            Polyhedron::new(normals, offsets).ok()
        },
    )
}

/// Bounded polygon: a random polygon intersected with the box `[-2, 2]^2`.
fn polygon() -> impl Strategy<Value = Polyhedron> {
    prop::collection::vec((0.0f64..std::f64::consts::TAU, 0.2f64..1.5), 1..6).prop_map(|hs| {
        let mut normals = vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]];
        let mut offsets = vec![2.0; 4];
        for (a, b) in hs {
            normals.push(vec![a.cos(), a.sin()]);
            offsets.push(b);
        }
        Polyhedron::new(normals, offsets).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inflation_composes_exactly(p in polyhedron(3, 4), a in 0.0f64..2.0, b in 0.0f64..2.0,
                                  xs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 20)) {
        let once = p.inflate(a + b).unwrap();
        let twice = p.inflate(a).unwrap().inflate(b).unwrap();
        prop_assert_eq!(once.offsets(), twice.offsets());
        for x in &xs {
            prop_assert_eq!(once.contains(x).unwrap(), twice.contains(x).unwrap());
        }
    }

    #[test]
    fn neighborhood_is_inside_inflation(p in polyhedron(2, 4), lambda in 0.0f64..1.5,
                                        xs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), 20)) {
        prop_assume!(p.is_feasible().unwrap());
        let inflated = p.inflate(lambda).unwrap();
        for x in &xs {
            if p.distance_to(x, DEFAULT_TOL).unwrap() <= lambda {
                prop_assert!(inflated.contains(x).unwrap());
            }
        }
    }

    #[test]
    fn single_halfspace_notions_coincide(p in polyhedron(4, 1), lambda in 0.0f64..2.0,
                                         xs in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 20)) {
        let inflated = p.inflate(lambda).unwrap();
        for x in &xs {
            prop_assert_eq!(p.in_neighborhood(x, lambda, DEFAULT_TOL).unwrap(), inflated.contains(x).unwrap());
        }
    }

    #[test]
    fn distance_is_zero_exactly_inside(p in polyhedron(3, 5),
                                       xs in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 20)) {
        prop_assume!(p.is_feasible().unwrap());
        for x in &xs {
            let d = p.distance_to(x, DEFAULT_TOL).unwrap();
            prop_assert_eq!(d == 0.0, p.contains(x).unwrap());
        }
    }

    #[test]
    fn cuts_contain_every_vertex(p in polygon(), eps in 0.05f64..1.0) {
        let aug = augment_cuts(&p, eps).unwrap();
        let verts = vertices_2d(&p).unwrap();
        for cut in &aug.cuts {
            for v in &verts {
                let s = cut.normal[0] * v[0] + cut.normal[1] * v[1];
                prop_assert!(s <= cut.offset + 1e-9);
            }
        }
    }

    #[test]
    fn augmented_inflation_stays_near(p in polygon(), eps in 0.05f64..1.0, exp in -2.0f64..1.0,
                                      us in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 30)) {
        let lambda = 10f64.powf(exp);
        let aug = augment_cuts(&p, eps).unwrap();
        let inflated = aug.inflate(lambda).unwrap();
        let verts = vertices_2d(&inflated).unwrap();
        let (lo, hi) = verts.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), v| {
            ([lo[0].min(v[0]), lo[1].min(v[1])], [hi[0].max(v[0]), hi[1].max(v[1])])
        });
        for (a, b) in us {
            let x = [lo[0] + a * (hi[0] - lo[0]), lo[1] + b * (hi[1] - lo[1])];
            if inflated.contains(&x).unwrap() {
                prop_assert!(p.distance_to(&x, DEFAULT_TOL).unwrap() <= (1.0 + eps) * lambda + 1e-9);
            }
        }
    }
}
