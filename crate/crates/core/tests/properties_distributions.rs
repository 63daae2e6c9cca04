use accompany_lab::distributions::{
    exact_pmf, gaussian_match, sample_law, sample_scheme, CompoundPoissonLaw, Component, ConvolutionLaw,
    FiniteLaw, HasMoments, MixtureFactor, Scheme,
};
use accompany_lab::RngStream;
use proptest::prelude::*;

/// Finite law on the half-integer grid in `[-2, 2]^d` with positive weights.
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

fn max_diff(a: &FiniteLaw, b: &FiniteLaw) -> f64 {
    let mut worst: f64 = 0.0;
    for (x, w) in a.iter() {
        worst = worst.max((w - b.pmf_at(x)).abs());
    }
    for (x, w) in b.iter() {
        worst = worst.max((w - a.pmf_at(x)).abs());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mixture_identity(u in finite_law(2, 4), v in finite_law(2, 4), p in 0.0f64..=1.0) {
        let f = MixtureFactor::new(p, u.clone(), v.clone());
        let law = f.law();
        for (x, w) in law.iter() {
            let expected = (1.0 - p) * u.pmf_at(x) + p * v.pmf_at(x);
            prop_assert!((w - expected).abs() <= 1e-15);
        }
        for (x, _) in u.iter().chain(v.iter()) {
            let expected = (1.0 - p) * u.pmf_at(x) + p * v.pmf_at(x);
            prop_assert!((law.pmf_at(x) - expected).abs() <= 1e-15);
        }
    }

    #[test]
    fn compound_poisson_semigroup(h1 in finite_law(1, 3), h2 in finite_law(1, 3), r1 in 0.1f64..2.0, r2 in 0.1f64..2.0) {
        let eps = 1e-12;
        let c1 = CompoundPoissonLaw::new(h1, r1).unwrap();
        let c2 = CompoundPoissonLaw::new(h2, r2).unwrap();
        let combined = exact_pmf(
            &ConvolutionLaw::new(1, vec![Component::CompoundPoisson(c1.clone()), Component::CompoundPoisson(c2.clone())]).unwrap(),
            eps,
        ).unwrap();
        // Independent path: truncate each count separately, then convolve.
        let separate = c1.truncated_pmf(eps, 1 << 20).unwrap().convolve(&c2.truncated_pmf(eps, 1 << 20).unwrap(), 1 << 20).unwrap();
        prop_assert!(max_diff(&combined, &separate) <= 3.0 * eps);
    }

    #[test]
    fn gaussian_match_preserves_moments(l in finite_law(3, 6)) {
        let g = gaussian_match(&l).unwrap();
        prop_assert!(g.moments().max_abs_diff(&l.moments()) <= 1e-15);
    }

    #[test]
    fn samplers_are_deterministic(seed in any::<u64>(), stream in 0u64..1000, u in finite_law(2, 3), v in finite_law(2, 3)) {
        // Symmetrised copy of `u`, so the centering condition holds exactly.
        let reflected = u.map_atoms(2, |x| x.iter().map(|v| -v).collect());
        let centred = FiniteLaw::mixture(&[(0.5, &u), (0.5, &reflected)]).unwrap();
        let tau = centred.support_radius();
        let s = Scheme::new(tau, 2, vec![MixtureFactor::new(0.3, centred, v.clone()); 3]);
        let rs = RngStream::new(seed, stream);
        prop_assert_eq!(sample_scheme(&s, rs, 50).unwrap(), sample_scheme(&s, rs, 50).unwrap());
        let law = ConvolutionLaw::single(Component::CompoundPoisson(CompoundPoissonLaw::accompanying(v)));
        prop_assert_eq!(sample_law(&law, rs, 50), sample_law(&law, rs, 50));
    }

    #[test]
    fn zero_jump_absorption(v in finite_law(2, 4), p in 0.01f64..1.0) {
        let eps = 1e-12;
        let zero = FiniteLaw::zero(2);
        let h = FiniteLaw::mixture(&[(1.0 - p, &zero), (p, &v)]).unwrap();
        let lhs = exact_pmf(&ConvolutionLaw::single(Component::CompoundPoisson(CompoundPoissonLaw::accompanying(h))), eps).unwrap();
        let rhs = CompoundPoissonLaw::new(v, p).unwrap().truncated_pmf(eps, 1 << 20).unwrap();
        prop_assert!(max_diff(&lhs, &rhs) <= eps);
    }
}

#[test]
fn switch_sampler_frequencies_match_mixture() {
    // One factor, d = 1: empirical frequencies of the sampler against the
    // mixture pmf, within 5 standard errors.
    let u = FiniteLaw::new(vec![vec![-0.5], vec![0.5]], vec![0.5, 0.5]).unwrap();
    let v = FiniteLaw::new(vec![vec![1.0], vec![2.0]], vec![0.25, 0.75]).unwrap();
    let f = MixtureFactor::new(0.2, u, v);
    let s = Scheme::new(0.5, 1, vec![f.clone()]);
    let n = 200_000;
    let xs = sample_scheme(&s, RngStream::new(4, 0), n).unwrap();
    for (x, w) in f.law().iter() {
        let hits = xs.iter().filter(|y| y[0] == x[0]).count() as f64 / n as f64;
        let se = (w * (1.0 - w) / n as f64).sqrt();
        assert!((hits - w).abs() <= 5.0 * se, "atom {x:?}: {hits} vs {w}");
    }
}
