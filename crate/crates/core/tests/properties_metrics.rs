use accompany_lab::distributions::FiniteLaw;
use accompany_lab::metrics::{discrepancy, levy_1d_exact, metric_from_discrepancy, rho_m, tv_exact};
use accompany_lab::{Polyhedron, SetKind};
use proptest::prelude::*;

fn finite_law(d: usize, max_atoms: usize) -> impl Strategy<Value = FiniteLaw> {
    prop::collection::vec((prop::collection::vec(-4i32..=4, d), 1u32..20), 1..=max_atoms).prop_map(
        move |pts| {
            let total: u32 = pts.iter().map(|p| p.1).sum();
            let atoms: Vec<Vec<f64>> = pts.iter().map(|p| p.0.iter().map(|&k| k as f64 * 0.5).collect()).collect();
            FiniteLaw::from_weighted_points(
                d,
                atoms.iter().map(|a| a.as_slice()).zip(pts.iter().map(|p| p.1 as f64 / total as f64)),
            )
        },
    )
}

fn directions_2d() -> Vec<Vec<f64>> {
    (0..8)
        .map(|k| {
            let a = k as f64 * std::f64::consts::FRAC_PI_4;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

/// Halfspaces with the given directions and an offset at every projected atom.
/// For fixed directions the sup over offsets is attained at such values, so
/// this family computes the exact halfspace discrepancy for these laws.
fn rich_family(laws: &[&FiniteLaw]) -> Vec<Polyhedron> {
    let mut out = Vec::new();
    for t in directions_2d() {
        let mut offs: Vec<f64> =
            laws.iter().flat_map(|l| l.atoms().map(|x| x[0] * t[0] + x[1] * t[1]).collect::<Vec<_>>()).collect();
        offs.sort_by(f64::total_cmp);
        offs.dedup();
        for b in offs {
            out.push(Polyhedron::new(vec![t.clone()], vec![b]).unwrap());
        }
    }
    out
}

fn random_family(specs: &[(f64, f64, f64, f64)]) -> Vec<Polyhedron> {
    specs
        .iter()
        .map(|&(a1, b1, a2, b2)| {
            Polyhedron::new(vec![vec![a1.cos(), a1.sin()], vec![a2.cos(), a2.sin()]], vec![b1, b2]).unwrap()
        })
        .collect()
}

fn family_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((0.0f64..6.3, -2.0f64..2.0, 0.0f64..6.3, -2.0f64..2.0), 2..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrepancy_nonincreasing_in_lambda(g in finite_law(2, 5), h in finite_law(2, 5), fam in family_strategy(),
                                           l1 in 0.0f64..2.0, dl in 0.0f64..2.0) {
        let fam = random_family(&fam);
        for kind in [SetKind::Inflate, SetKind::Neighborhood] {
            let a = discrepancy(&g, &h, &fam, l1, kind).unwrap().value;
            let b = discrepancy(&g, &h, &fam, l1 + dl, kind).unwrap().value;
            prop_assert!(b <= a);
        }
    }

    #[test]
    fn larger_family_never_decreases(g in finite_law(2, 5), h in finite_law(2, 5), fam in family_strategy(), lambda in 0.0f64..1.0) {
        let fam = random_family(&fam);
        let sub = &fam[..fam.len() / 2];
        prop_assert!(rho_m(&g, &h, sub).unwrap() <= rho_m(&g, &h, &fam).unwrap());
        for kind in [SetKind::Inflate, SetKind::Neighborhood] {
            prop_assert!(discrepancy(&g, &h, sub, lambda, kind).unwrap().value
                <= discrepancy(&g, &h, &fam, lambda, kind).unwrap().value);
        }
    }

    #[test]
    fn symmetric_in_arguments(g in finite_law(2, 5), h in finite_law(2, 5), fam in family_strategy(), lambda in 0.0f64..1.0,
                              a in finite_law(1, 5), b in finite_law(1, 5)) {
        let fam = random_family(&fam);
        for kind in [SetKind::Inflate, SetKind::Neighborhood] {
            prop_assert_eq!(discrepancy(&g, &h, &fam, lambda, kind).unwrap().value,
                            discrepancy(&h, &g, &fam, lambda, kind).unwrap().value);
        }
        prop_assert_eq!(tv_exact(&g, &h).unwrap(), tv_exact(&h, &g).unwrap());
        prop_assert_eq!(levy_1d_exact(&a, &b).unwrap(), levy_1d_exact(&b, &a).unwrap());
    }

    #[test]
    fn tv_vanishes_only_on_equal_laws(g in finite_law(2, 5), h in finite_law(2, 5)) {
        prop_assert_eq!(tv_exact(&g, &g).unwrap(), 0.0);
        let tv = tv_exact(&g, &h).unwrap();
        prop_assert_eq!(tv == 0.0, g == h);
    }

    #[test]
    fn inflate_metric_triangle(f in finite_law(2, 4), g in finite_law(2, 4), h in finite_law(2, 4)) {
        let tol = 1e-9;
        let fam = rich_family(&[&f, &g, &h]);
        let l = |a: &FiniteLaw, b: &FiniteLaw| metric_from_discrepancy(a, b, &fam, SetKind::Inflate, tol).unwrap();
        prop_assert!(l(&f, &h) <= l(&f, &g) + l(&g, &h) + 3.0 * tol);
    }

    #[test]
    fn domination(g in finite_law(2, 5), h in finite_law(2, 5), fam in family_strategy()) {
        let fam = random_family(&fam);
        let rho = rho_m(&g, &h, &fam).unwrap();
        prop_assert!(rho <= tv_exact(&g, &h).unwrap() + 1e-15);
        for kind in [SetKind::Inflate, SetKind::Neighborhood] {
            prop_assert!(discrepancy(&g, &h, &fam, 0.0, kind).unwrap().value <= rho + 1e-15);
        }
    }

    #[test]
    fn single_halfspace_kinds_coincide(g in finite_law(2, 5), h in finite_law(2, 5),
                                       specs in prop::collection::vec((0.0f64..6.3, -2.0f64..2.0), 1..10), lambda in 0.0f64..1.5) {
        let fam: Vec<Polyhedron> = specs.iter().map(|&(a, b)| Polyhedron::new(vec![vec![a.cos(), a.sin()]], vec![b]).unwrap()).collect();
        let a = discrepancy(&g, &h, &fam, lambda, SetKind::Inflate).unwrap();
        let b = discrepancy(&g, &h, &fam, lambda, SetKind::Neighborhood).unwrap();
        prop_assert_eq!(a.value, b.value);
        prop_assert_eq!(a.witness_index, b.witness_index);
    }
}

#[test]
fn levy_between_point_masses() {
    for a in [0.1, 0.5, 2.0, 10.0] {
        let d = levy_1d_exact(&FiniteLaw::point_mass(vec![0.0]), &FiniteLaw::point_mass(vec![a])).unwrap();
        assert!((d - a.min(1.0)).abs() <= 1e-9, "a = {a}: {d}");
    }
}
