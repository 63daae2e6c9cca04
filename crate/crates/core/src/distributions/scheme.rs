//! Mixture schemes `F_i = (1-p_i) U_i + p_i V_i` and the infinitely divisible
//! laws built from them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    CompoundPoissonLaw, Component, ConvolutionLaw, DistributionError, FiniteLaw, GaussianLaw,
    HasMoments, Moments, Samplable,
};
use crate::linalg::norm;
use crate::rng::RngStream;

/// Tolerance for `||mean(U_i)|| = 0`.
pub const MEAN_TOL: f64 = 1e-12;
/// Absolute tolerance for matching the moments of `D_0`.
pub const D0_MOMENT_TOL: f64 = 1e-9;

/// One summand law `(1 - p) U + p V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFactor {
    pub p: f64,
    #[serde(rename = "u")]
    pub u_law: FiniteLaw,
    #[serde(rename = "v")]
    pub v_law: FiniteLaw,
}

impl MixtureFactor {
    pub fn new(p: f64, u_law: FiniteLaw, v_law: FiniteLaw) -> Self {
        Self { p, u_law, v_law }
    }

    /// `F_i = (1-p) U + p V`.
    pub fn law(&self) -> FiniteLaw {
        FiniteLaw::mixture(&[(1.0 - self.p, &self.u_law), (self.p, &self.v_law)])
            .expect("validated factor")
    }

    /// `H_i = (1-p) U + p E_0`.
    pub fn u_part(&self) -> FiniteLaw {
        let e = FiniteLaw::zero(self.u_law.dimension());
        FiniteLaw::mixture(&[(1.0 - self.p, &self.u_law), (self.p, &e)]).expect("validated factor")
    }

    /// `G_i = (1-p) E_0 + p V`.
    pub fn v_part(&self) -> FiniteLaw {
        let e = FiniteLaw::zero(self.v_law.dimension());
        FiniteLaw::mixture(&[(1.0 - self.p, &e), (self.p, &self.v_law)]).expect("validated factor")
    }

    /// `a_i = E[U_i]`.
    pub fn u_mean(&self) -> Vec<f64> {
        self.u_law.mean()
    }
}

/// A row of independent mixture summands with `U_i` supported in the
/// closed ball of radius `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scheme {
    pub tau: f64,
    pub dimension: usize,
    pub factors: Vec<MixtureFactor>,
}

impl Scheme {
    pub fn new(tau: f64, dimension: usize, factors: Vec<MixtureFactor>) -> Self {
        Self {
            tau,
            dimension,
            factors,
        }
    }

    /// `n` copies of the Bernoulli factor `(1-p) E_0 + p E_{e_1}`.
    pub fn bernoulli(n: usize, p: f64, dimension: usize) -> Self {
        let mut e1 = vec![0.0; dimension];
        e1[0] = 1.0;
        let f = MixtureFactor::new(p, FiniteLaw::zero(dimension), FiniteLaw::point_mass(e1));
        Self::new(0.0, dimension, vec![f; n])
    }

    /// `p = max_i p_i` (0 for an empty row).
    pub fn max_p(&self) -> f64 {
        self.factors.iter().map(|f| f.p).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// The shifts `a_i = E[U_i]`.
    pub fn shifts(&self) -> Vec<Vec<f64>> {
        self.factors.iter().map(MixtureFactor::u_mean).collect()
    }

    /// Dimensions, `p_i` ranges and the `tau`-ball support of every `U_i`.
    /// The centering condition is not checked here.
    pub fn validate_support(&self) -> Result<(), DistributionError> {
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(DistributionError::InvalidLaw(format!("tau = {}", self.tau)));
        }
        let radius = self.tau * (1.0 + 1e-12) + 1e-15;
        for (i, f) in self.factors.iter().enumerate() {
            for found in [f.u_law.dimension(), f.v_law.dimension()] {
                if found != self.dimension {
                    return Err(DistributionError::DimensionMismatch {
                        expected: self.dimension,
                        found,
                    });
                }
            }
            if !(0.0..=1.0).contains(&f.p) {
                return Err(DistributionError::WeightViolation { factor: i, p: f.p });
            }
            for (j, (x, w)) in f.u_law.iter().enumerate() {
                let r = norm(x);
                if w > 0.0 && r > radius {
                    return Err(DistributionError::SupportViolation {
                        factor: i,
                        atom: j,
                        norm: r,
                        tau: self.tau,
                    });
                }
            }
        }
        Ok(())
    }

    /// Full mixture-scheme conditions: [`validate_support`](Self::validate_support)
    /// plus `E[U_i] = 0` within `1e-12` per coordinate.
    pub fn validate(&self) -> Result<(), DistributionError> {
        self.validate_support()?;
        for (i, f) in self.factors.iter().enumerate() {
            let m = f.u_mean();
            if m.iter().any(|v| v.abs() > MEAN_TOL) {
                return Err(DistributionError::MeanViolation {
                    factor: i,
                    norm: norm(&m),
                });
            }
        }
        Ok(())
    }

    /// `F = prod_i F_i` as a convolution of finite laws.
    pub fn product_law(&self) -> ConvolutionLaw {
        ConvolutionLaw::new(
            self.dimension,
            self.factors
                .iter()
                .map(|f| Component::Finite(f.law()))
                .collect(),
        )
        .expect("factors share the scheme dimension")
    }

    /// Moments of `prod_i ((1-p_i) U_i + p_i E)`.
    pub fn u_part_moments(&self) -> Moments {
        self.factors
            .iter()
            .fold(Moments::zero(self.dimension), |acc, f| {
                acc.add(&f.u_part().moments()).expect("shared dimension")
            })
    }

    /// `prod_i e((1-p_i) E + p_i V_i)`.
    pub fn v_part_accompanying(&self) -> Vec<Component> {
        self.factors
            .iter()
            .map(|f| Component::CompoundPoisson(CompoundPoissonLaw::accompanying(f.v_part())))
            .collect()
    }

    /// `D_0 = prod_i e((1-p_i) U_i + p_i E)`, which turns `D**` into `D`.
    pub fn d0_accompanying(&self) -> ConvolutionLaw {
        ConvolutionLaw::new(
            self.dimension,
            self.factors
                .iter()
                .map(|f| Component::CompoundPoisson(CompoundPoissonLaw::accompanying(f.u_part())))
                .collect(),
        )
        .expect("shared dimension")
    }

    /// `D_0 = Phi(prod_i ((1-p_i) U_i + p_i E))`, which turns `D**` into `D*`.
    pub fn d0_gaussian(&self) -> Result<ConvolutionLaw, DistributionError> {
        let g = GaussianLaw::from_moments(&self.u_part_moments())?;
        Ok(ConvolutionLaw::single(Component::Gaussian(g)))
    }

    /// Draws one point of `F` using the switch construction
    /// `xi_i = (1 - alpha_i) X_i + alpha_i Y_i`, `alpha_i ~ Bernoulli(p_i)`.
    pub(crate) fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for f in &self.factors {
            let alpha = rng.random::<f64>() < f.p;
            if alpha {
                f.v_law.add_sample(rng, out);
            } else {
                f.u_law.add_sample(rng, out);
            }
        }
    }

    pub(crate) fn draw(&self, stream: RngStream, count: usize) -> Vec<Vec<f64>> {
        let mut rng = stream.rng();
        (0..count)
            .map(|_| {
                let mut x = vec![0.0; self.dimension];
                self.add_sample(&mut rng, &mut x);
                x
            })
            .collect()
    }
}

impl Samplable for Scheme {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        Scheme::add_sample(self, rng, out)
    }
}

fn invalid(e: DistributionError) -> DistributionError {
    DistributionError::InvalidScheme(Box::new(e))
}

/// Checks every factor of `s` against the mixture-scheme conditions.
pub fn validate_scheme(s: &Scheme) -> Result<(), DistributionError> {
    s.validate()
}

/// `count` independent draws from `F = prod_i F_i`.
pub fn sample_scheme(
    s: &Scheme,
    stream: RngStream,
    count: usize,
) -> Result<Vec<Vec<f64>>, DistributionError> {
    s.validate().map_err(invalid)?;
    Ok(s.draw(stream, count))
}

/// `D = prod_i e(F_i)`, or with `recenter` the law
/// `D̄ = prod_i E_{a_i} e(F_i E_{-a_i})` with `a_i = E[U_i]`.
///
/// Only the support conditions are required: `D` and `D̄` are both
/// meaningful for non-centred `U_i`.
pub fn accompany(s: &Scheme, recenter: bool) -> Result<ConvolutionLaw, DistributionError> {
    s.validate_support().map_err(invalid)?;
    let mut components = Vec::with_capacity(s.len() * 2);
    for f in &s.factors {
        let law = f.law();
        if recenter {
            let a = f.u_mean();
            let neg: Vec<f64> = a.iter().map(|v| -v).collect();
            components.push(Component::Shift(a));
            components.push(Component::CompoundPoisson(CompoundPoissonLaw::accompanying(
                law.shifted(&neg),
            )));
        } else {
            components.push(Component::CompoundPoisson(CompoundPoissonLaw::accompanying(law)));
        }
    }
    Ok(ConvolutionLaw::new(s.dimension, components).expect("shared dimension"))
}

/// The Gaussian law with the mean and covariance of `law`.
pub fn gaussian_match<L: HasMoments>(law: &L) -> Result<GaussianLaw, DistributionError> {
    GaussianLaw::from_moments(&law.moments())
}

/// `D* = Phi(prod_i ((1-p_i) U_i + p_i E)) * prod_i e((1-p_i) E + p_i V_i)`.
pub fn build_dstar(s: &Scheme) -> Result<ConvolutionLaw, DistributionError> {
    s.validate().map_err(invalid)?;
    let mut components = s.d0_gaussian()?.components().to_vec();
    components.extend(s.v_part_accompanying());
    ConvolutionLaw::new(s.dimension, components)
}

/// `D** = D_0 * prod_i e((1-p_i) E + p_i V_i)` for an infinitely divisible
/// `D_0` made of compound Poisson and Gaussian components whose jumps lie in
/// the `tau`-ball and whose mean and covariance match those of
/// `prod_i ((1-p_i) U_i + p_i E)` within `1e-9`.
pub fn build_dstarstar(s: &Scheme, d0: &ConvolutionLaw) -> Result<ConvolutionLaw, DistributionError> {
    s.validate().map_err(invalid)?;
    if d0.dimension() != s.dimension {
        return Err(DistributionError::DimensionMismatch {
            expected: s.dimension,
            found: d0.dimension(),
        });
    }
    let radius = s.tau * (1.0 + 1e-12) + 1e-15;
    for (i, c) in d0.components().iter().enumerate() {
        match c {
            Component::CompoundPoisson(cp) => {
                let r = cp.jump_radius();
                if r > radius {
                    return Err(DistributionError::SpectralSupportViolation {
                        component: i,
                        norm: r,
                        tau: s.tau,
                    });
                }
            }
            Component::Gaussian(_) => {}
            _ => return Err(DistributionError::InvalidD0Component(i)),
        }
    }
    let expected = s.u_part_moments();
    let found = d0.moments();
    let deviation = expected.max_abs_diff(&found);
    if deviation > D0_MOMENT_TOL {
        return Err(DistributionError::MomentMismatch {
            expected: Box::new(expected),
            found: Box::new(found),
            deviation,
        });
    }
    let mut components = d0.components().to_vec();
    components.extend(s.v_part_accompanying());
    ConvolutionLaw::new(s.dimension, components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::exact_pmf;

    fn symmetric_u(tau: f64) -> FiniteLaw {
        FiniteLaw::new(vec![vec![-tau], vec![tau]], vec![0.5, 0.5]).unwrap()
    }

    fn lattice(n: usize, p: f64, tau: f64) -> Scheme {
        let f = MixtureFactor::new(p, symmetric_u(tau), FiniteLaw::point_mass(vec![1.0]));
        Scheme::new(tau, 1, vec![f; n])
    }

    #[test]
    fn point_mass_factors_are_valid() {
        let f = MixtureFactor::new(0.3, FiniteLaw::zero(2), FiniteLaw::point_mass(vec![1.0, 1.0]));
        assert!(validate_scheme(&Scheme::new(0.0, 2, vec![f; 3])).is_ok());
    }

    #[test]
    fn atom_outside_ball_is_a_support_violation() {
        let s = lattice(2, 0.1, 1.0);
        let bad = Scheme { tau: 1.0 / 1.5, ..s };
        assert!(matches!(
            validate_scheme(&bad),
            Err(DistributionError::SupportViolation { factor: 0, .. })
        ));
    }

    #[test]
    fn off_centre_u_is_a_mean_violation() {
        let u = FiniteLaw::new(vec![vec![-1.0], vec![0.5]], vec![0.5, 0.5]).unwrap();
        let s = Scheme::new(1.0, 1, vec![MixtureFactor::new(0.2, u, FiniteLaw::zero(1))]);
        assert!(matches!(
            validate_scheme(&s),
            Err(DistributionError::MeanViolation { factor: 0, .. })
        ));
        assert!(s.validate_support().is_ok());
        assert!(matches!(
            sample_scheme(&s, RngStream::new(0, 0), 3),
            Err(DistributionError::InvalidScheme(_))
        ));
    }

    #[test]
    fn p_outside_unit_interval_is_rejected() {
        let mut s = lattice(1, 0.1, 0.5);
        s.factors[0].p = 1.5;
        assert!(matches!(
            validate_scheme(&s),
            Err(DistributionError::WeightViolation { .. })
        ));
    }

    #[test]
    fn empty_row_samples_zero() {
        let s = Scheme::new(0.0, 3, vec![]);
        let xs = sample_scheme(&s, RngStream::new(4, 0), 5).unwrap();
        assert!(xs.iter().all(|x| x == &vec![0.0; 3]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = lattice(5, 0.3, 0.2);
        let a = sample_scheme(&s, RngStream::new(9, 2), 50).unwrap();
        let b = sample_scheme(&s, RngStream::new(9, 2), 50).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn accompany_of_trivial_factor_is_point_mass() {
        let s = Scheme::new(0.0, 1, vec![MixtureFactor::new(0.0, FiniteLaw::zero(1), FiniteLaw::zero(1))]);
        let d = accompany(&s, false).unwrap();
        let pmf = exact_pmf(&d, 1e-12).unwrap();
        assert_eq!(pmf.len(), 1);
        assert_eq!(pmf.atom(0), &[0.0]);
    }

    #[test]
    fn recentering_centred_scheme_changes_nothing() {
        let s = lattice(3, 0.2, 0.25);
        let d = exact_pmf(&accompany(&s, false).unwrap(), 1e-12).unwrap();
        let dbar = exact_pmf(&accompany(&s, true).unwrap(), 1e-12).unwrap();
        assert_eq!(d.len(), dbar.len());
        for ((x, w), (y, v)) in d.iter().zip(dbar.iter()) {
            assert_eq!(x, y);
            assert!((w - v).abs() < 1e-15);
        }
    }

    #[test]
    fn dstar_with_unit_p_is_product_of_v_accompanying() {
        let f = MixtureFactor::new(1.0, symmetric_u(0.5), FiniteLaw::point_mass(vec![2.0]));
        let s = Scheme::new(0.5, 1, vec![f; 2]);
        let dstar = build_dstar(&s).unwrap();
        match &dstar.components()[0] {
            Component::Gaussian(g) => assert!(g.is_degenerate() && g.mean()[0] == 0.0),
            other => panic!("expected Gaussian, got {other:?}"),
        }
        assert_eq!(dstar.components().len(), 3);
    }

    #[test]
    fn dstar_of_trivial_scheme_is_point_mass() {
        let s = Scheme::new(0.0, 1, vec![MixtureFactor::new(0.0, FiniteLaw::zero(1), FiniteLaw::point_mass(vec![3.0])); 4]);
        let pmf = exact_pmf(&build_dstar(&s).unwrap(), 1e-12).unwrap();
        assert_eq!(pmf.len(), 1);
        assert_eq!(pmf.atom(0), &[0.0]);
    }

    #[test]
    fn dstarstar_checks_jump_support() {
        let s = lattice(3, 0.1, 0.5);
        let base = FiniteLaw::new(vec![vec![-0.505], vec![0.505]], vec![0.5, 0.5]).unwrap();
        let d0 = ConvolutionLaw::single(Component::CompoundPoisson(
            CompoundPoissonLaw::new(base, 1.0).unwrap(),
        ));
        assert!(matches!(
            build_dstarstar(&s, &d0),
            Err(DistributionError::SpectralSupportViolation { .. })
        ));
    }

    #[test]
    fn dstarstar_reports_moment_mismatch() {
        let s = lattice(3, 0.1, 0.5);
        let base = FiniteLaw::new(vec![vec![-0.5], vec![0.5]], vec![0.5, 0.5]).unwrap();
        let d0 = ConvolutionLaw::single(Component::CompoundPoisson(
            CompoundPoissonLaw::new(base, 1.0).unwrap(),
        ));
        match build_dstarstar(&s, &d0) {
            Err(DistributionError::MomentMismatch { expected, found, .. }) => {
                assert!((expected.covariance[(0, 0)] - 3.0 * 0.9 * 0.25).abs() < 1e-12);
                assert!((found.covariance[(0, 0)] - 0.25).abs() < 1e-12);
            }
            other => panic!("expected mismatch, got {other:?}"),
        }
    }

    #[test]
    fn dstar_gaussian_has_zero_mean_for_centred_u() {
        let s = lattice(4, 0.2, 0.3);
        let g = s.d0_gaussian().unwrap();
        let m = g.moments();
        assert_eq!(m.mean[0], 0.0);
        assert!((m.covariance[(0, 0)] - 4.0 * 0.8 * 0.09).abs() < 1e-12);
    }
}
