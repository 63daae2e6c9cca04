use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DistributionError, FiniteLaw, HasMoments, Moments, Samplable};

/// Tolerance on covariance asymmetry.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest admissible covariance eigenvalue.
pub const EIGEN_FLOOR: f64 = -1e-10;

/// `e_rate(H)`: the law of `X_1 + ... + X_N` with `N ~ Poisson(rate)` and
/// `X_s` iid with law `base`. With `rate = 1` this is the accompanying
/// compound Poisson law `e(H) = e^{-1} sum_s H^s / s!`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompoundPoissonLaw {
    base: FiniteLaw,
    rate: f64,
}

impl CompoundPoissonLaw {
    pub fn new(base: FiniteLaw, rate: f64) -> Result<Self, DistributionError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(DistributionError::InvalidRate(rate));
        }
        Ok(Self { base, rate })
    }

    /// `e(H)`, unit intensity.
    pub fn accompanying(base: FiniteLaw) -> Self {
        Self { base, rate: 1.0 }
    }

    pub fn base(&self) -> &FiniteLaw {
        &self.base
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn dimension(&self) -> usize {
        self.base.dimension()
    }

    /// Largest jump norm carrying positive weight.
    pub fn jump_radius(&self) -> f64 {
        self.base.support_radius()
    }
}

impl HasMoments for CompoundPoissonLaw {
    fn moments(&self) -> Moments {
        let mean = DVector::from_vec(self.base.mean()) * self.rate;
        let cov = self.base.second_moment() * self.rate;
        Moments {
            mean,
            covariance: cov,
        }
    }
}

impl Samplable for CompoundPoissonLaw {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let count = Poisson::new(self.rate)
            .expect("rate validated at construction")
            .sample(rng) as u64;
        for _ in 0..count {
            self.base.add_sample(rng, out);
        }
    }
}

/// Gaussian law with given mean and positive semidefinite covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct GaussianLaw {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    /// `L` with `L L^T = covariance`, from the symmetric eigendecomposition.
    factor: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    covariance: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for GaussianLaw {
    type Error = DistributionError;
    fn try_from(r: GaussianRepr) -> Result<Self, Self::Error> {
        GaussianLaw::new(r.mean, r.covariance)
    }
}

impl From<GaussianLaw> for GaussianRepr {
    fn from(g: GaussianLaw) -> Self {
        let d = g.mean.len();
        GaussianRepr {
            mean: g.mean.iter().copied().collect(),
            covariance: (0..d)
                .map(|i| (0..d).map(|j| g.covariance[(i, j)]).collect())
                .collect(),
        }
    }
}

impl GaussianLaw {
    pub fn new(mean: Vec<f64>, covariance: Vec<Vec<f64>>) -> Result<Self, DistributionError> {
        let d = mean.len();
        if covariance.len() != d || covariance.iter().any(|r| r.len() != d) {
            return Err(DistributionError::DimensionMismatch {
                expected: d,
                found: covariance.len(),
            });
        }
        let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
        Self::from_matrices(DVector::from_vec(mean), cov)
    }

    pub fn from_moments(m: &Moments) -> Result<Self, DistributionError> {
        Self::from_matrices(m.mean.clone(), m.covariance.clone())
    }

    pub fn standard(d: usize) -> Self {
        Self::from_matrices(DVector::zeros(d), DMatrix::identity(d, d))
            .expect("identity is positive definite")
    }

    fn from_matrices(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, DistributionError> {
        let d = mean.len();
        if d == 0 {
            return Err(DistributionError::InvalidLaw("zero-dimensional Gaussian".into()));
        }
        if cov.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(DistributionError::NonPSDCovariance("non-finite entry".into()));
        }
        for i in 0..d {
            for j in i + 1..d {
                let gap = (cov[(i, j)] - cov[(j, i)]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(DistributionError::NonPSDCovariance(format!(
                        "asymmetry {gap:e} at ({i}, {j})"
                    )));
                }
            }
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < EIGEN_FLOOR {
            return Err(DistributionError::NonPSDCovariance(format!(
                "eigenvalue {min:e}"
            )));
        }
        let mut factor = eig.eigenvectors.clone();
        for (k, lam) in eig.eigenvalues.iter().enumerate() {
            let s = lam.max(0.0).sqrt();
            factor.column_mut(k).scale_mut(s);
        }
        Ok(Self {
            mean,
            covariance: cov,
            factor,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// A Gaussian with zero covariance is the point mass at its mean.
    pub fn is_degenerate(&self) -> bool {
        self.covariance.iter().all(|c| *c == 0.0)
    }
}

impl HasMoments for GaussianLaw {
    fn moments(&self) -> Moments {
        Moments {
            mean: self.mean.clone(),
            covariance: self.covariance.clone(),
        }
    }
}

impl Samplable for GaussianLaw {
    fn dimension(&self) -> usize {
        self.mean.len()
    }

    fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for i in 0..d {
            let mut v = self.mean[i];
            for (k, zk) in z.iter().enumerate() {
                v += self.factor[(i, k)] * zk;
            }
            out[i] += v;
        }
    }
}

/// One factor of a [`ConvolutionLaw`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    Finite(FiniteLaw),
    CompoundPoisson(CompoundPoissonLaw),
    Gaussian(GaussianLaw),
    /// The point mass `E_a`.
    Shift(Vec<f64>),
}

impl Component {
    pub fn dimension(&self) -> usize {
        match self {
            Component::Finite(l) => l.dimension(),
            Component::CompoundPoisson(l) => l.dimension(),
            Component::Gaussian(l) => l.dimension(),
            Component::Shift(a) => a.len(),
        }
    }
}

impl HasMoments for Component {
    fn moments(&self) -> Moments {
        match self {
            Component::Finite(l) => l.moments(),
            Component::CompoundPoisson(l) => l.moments(),
            Component::Gaussian(l) => l.moments(),
            Component::Shift(a) => Moments {
                mean: DVector::from_column_slice(a),
                covariance: DMatrix::zeros(a.len(), a.len()),
            },
        }
    }
}

impl Samplable for Component {
    fn dimension(&self) -> usize {
        Component::dimension(self)
    }

    fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Component::Finite(l) => l.add_sample(rng, out),
            Component::CompoundPoisson(l) => l.add_sample(rng, out),
            Component::Gaussian(l) => l.add_sample(rng, out),
            Component::Shift(a) => {
                for (o, ai) in out.iter_mut().zip(a) {
                    *o += ai;
                }
            }
        }
    }
}

/// Convolution product of independent components. No components means `E_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConvolutionRepr", into = "ConvolutionRepr")]
pub struct ConvolutionLaw {
    dimension: usize,
    components: Vec<Component>,
}

#[derive(Serialize, Deserialize)]
struct ConvolutionRepr {
    dimension: usize,
    components: Vec<Component>,
}

impl TryFrom<ConvolutionRepr> for ConvolutionLaw {
    type Error = DistributionError;
    fn try_from(r: ConvolutionRepr) -> Result<Self, Self::Error> {
        ConvolutionLaw::new(r.dimension, r.components)
    }
}

impl From<ConvolutionLaw> for ConvolutionRepr {
    fn from(c: ConvolutionLaw) -> Self {
        ConvolutionRepr {
            dimension: c.dimension,
            components: c.components,
        }
    }
}

impl ConvolutionLaw {
    pub fn new(dimension: usize, components: Vec<Component>) -> Result<Self, DistributionError> {
        if dimension == 0 {
            return Err(DistributionError::InvalidLaw("zero dimension".into()));
        }
        if let Some(c) = components.iter().find(|c| c.dimension() != dimension) {
            return Err(DistributionError::DimensionMismatch {
                expected: dimension,
                found: c.dimension(),
            });
        }
        Ok(Self {
            dimension,
            components,
        })
    }

    pub fn identity(dimension: usize) -> Self {
        Self {
            dimension,
            components: Vec::new(),
        }
    }

    pub fn single(component: Component) -> Self {
        Self {
            dimension: component.dimension(),
            components: vec![component],
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// `self * other`.
    pub fn convolve(&self, other: &ConvolutionLaw) -> Result<Self, DistributionError> {
        let mut components = self.components.clone();
        components.extend(other.components.iter().cloned());
        Self::new(self.dimension, components)
    }

    pub fn has_gaussian(&self) -> bool {
        self.components
            .iter()
            .any(|c| matches!(c, Component::Gaussian(_)))
    }
}

impl HasMoments for ConvolutionLaw {
    fn moments(&self) -> Moments {
        self.components
            .iter()
            .fold(Moments::zero(self.dimension), |acc, c| {
                acc.add(&c.moments())
                    .expect("components share the law dimension")
            })
    }
}

impl Samplable for ConvolutionLaw {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn add_sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for c in &self.components {
            c.add_sample(rng, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_jump_compound_poisson_has_poisson_moments() {
        let cp = CompoundPoissonLaw::accompanying(FiniteLaw::point_mass(vec![1.0]));
        let m = cp.moments();
        assert_eq!(m.mean[0], 1.0);
        assert_eq!(m.covariance[(0, 0)], 1.0);
    }

    #[test]
    fn rate_must_be_positive() {
        let base = FiniteLaw::zero(1);
        assert!(CompoundPoissonLaw::new(base.clone(), 0.0).is_err());
        assert!(CompoundPoissonLaw::new(base, f64::NAN).is_err());
    }

    #[test]
    fn gaussian_rejects_asymmetric_and_indefinite() {
        assert!(GaussianLaw::new(vec![0.0, 0.0], vec![vec![1.0, 0.1], vec![0.0, 1.0]]).is_err());
        assert!(GaussianLaw::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(GaussianLaw::new(vec![0.0, 0.0], vec![vec![1.0, 1.0], vec![1.0, 1.0]]).is_ok());
    }

    #[test]
    fn gaussian_sampler_reproduces_covariance() {
        let g = GaussianLaw::new(vec![1.0, -1.0], vec![vec![2.0, 0.6], vec![0.6, 0.5]]).unwrap();
        let mut rng = crate::RngStream::new(11, 0).rng();
        let n = 200_000;
        let mut s = [0.0; 2];
        let mut ss = [0.0; 3];
        for _ in 0..n {
            let mut x = [0.0; 2];
            g.add_sample(&mut rng, &mut x);
            s[0] += x[0];
            s[1] += x[1];
            ss[0] += (x[0] - 1.0) * (x[0] - 1.0);
            ss[1] += (x[0] - 1.0) * (x[1] + 1.0);
            ss[2] += (x[1] + 1.0) * (x[1] + 1.0);
        }
        let nf = n as f64;
        assert!((s[0] / nf - 1.0).abs() < 0.02);
        assert!((s[1] / nf + 1.0).abs() < 0.02);
        assert!((ss[0] / nf - 2.0).abs() < 0.03);
        assert!((ss[1] / nf - 0.6).abs() < 0.02);
        assert!((ss[2] / nf - 0.5).abs() < 0.01);
    }

    #[test]
    fn convolution_moments_add() {
        let f = FiniteLaw::new(vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
        let law = ConvolutionLaw::new(1, vec![Component::Finite(f.clone()); 7]).unwrap();
        let m = law.moments();
        assert!((m.mean[0] - 7.0).abs() < 1e-12);
        assert!((m.covariance[(0, 0)] - 7.0).abs() < 1e-12);
        assert!(ConvolutionLaw::new(2, vec![Component::Finite(f)]).is_err());
    }

    #[test]
    fn convolution_json_shape() {
        let law = ConvolutionLaw::new(
            1,
            vec![
                Component::Shift(vec![0.5]),
                Component::CompoundPoisson(CompoundPoissonLaw::accompanying(FiniteLaw::point_mass(
                    vec![1.0],
                ))),
            ],
        )
        .unwrap();
        let s = serde_json::to_string(&law).unwrap();
        assert!(s.contains(r#""shift":[0.5]"#));
        assert!(s.contains(r#""compound_poisson""#));
        let back: ConvolutionLaw = serde_json::from_str(&s).unwrap();
        assert_eq!(back, law);
    }
}
