use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::distributions::{
    accompany, build_dstar, build_dstarstar, CompoundPoissonLaw, Component, ConvolutionLaw,
    DistributionError, FiniteLaw, MixtureFactor, Scheme,
};
use crate::metrics::SetKind;

/// How the scheme of each grid cell is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SchemeSpec {
    /// `U_i = E_0`, `V_i = E_{e_1}`; the `tau` grid is ignored (cells use 0).
    Bernoulli,
    /// `U_i` uniform on `{±tau e_k}`, `V_i` uniform on `{e_k}`.
    Lattice,
    /// A fixed scheme; only the `m` grid is swept.
    Custom { scheme: Scheme },
}

/// The approximant compared against `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approximant {
    D,
    Dstar,
    Dstarstar,
    Dbar,
}

impl Approximant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Approximant::D => "d",
            Approximant::Dstar => "dstar",
            Approximant::Dstarstar => "dstarstar",
            Approximant::Dbar => "dbar",
        }
    }

    /// The approximating law for `s`.
    pub fn build(&self, s: &Scheme) -> Result<ConvolutionLaw, DistributionError> {
        match self {
            Approximant::D => accompany(s, false),
            Approximant::Dbar => accompany(s, true),
            Approximant::Dstar => build_dstar(s),
            Approximant::Dstarstar => dstarstar_instance(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grid {
    pub p: Vec<f64>,
    pub tau: Vec<f64>,
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    pub m: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            p: vec![0.2, 0.1, 0.05, 0.02, 0.01],
            tau: vec![0.0, 0.01, 0.05, 0.1],
            n: vec![5, 10, 20],
            d: vec![1, 2, 3],
            m: vec![1, 2, 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilySpec {
    /// Number of random polyhedra per cell on the Monte Carlo path.
    pub size: usize,
    pub kind: SetKind,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            size: 100,
            kind: SetKind::Inflate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scheme: SchemeSpec,
    pub grid: Grid,
    pub family: FamilySpec,
    /// Samples per law per cell on the Monte Carlo path.
    pub samples: usize,
    pub seed: u64,
    pub approximant: Approximant,
    /// λ-profile points `λ_k = k tau`, `k = 0..=profile_steps`.
    pub profile_steps: usize,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: SchemeSpec::Lattice,
            grid: Grid::default(),
            family: FamilySpec::default(),
            samples: 100_000,
            seed: 0,
            approximant: Approximant::D,
            profile_steps: 12,
            output: None,
        }
    }
}

/// One grid cell before evaluation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CellSpec {
    pub index: usize,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub p: f64,
    pub tau: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::InvalidConfig(msg));
        let g = &self.grid;
        if g.m.is_empty() {
            return bad("grid.m is empty".into());
        }
        if !matches!(self.scheme, SchemeSpec::Custom { .. })
            && (g.p.is_empty() || g.tau.is_empty() || g.n.is_empty() || g.d.is_empty())
        {
            return bad("every grid axis must be nonempty".into());
        }
        if self.samples == 0 || self.family.size == 0 {
            return bad("sample counts and family size must be >= 1".into());
        }
        if let Some(p) = g.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p = {p} is outside [0, 1]"));
        }
        if let Some(t) = g.tau.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return bad(format!("tau = {t} must be finite and >= 0"));
        }
        if g.d.contains(&0) || g.m.contains(&0) {
            return bad("d and m must be >= 1".into());
        }
        if let SchemeSpec::Custom { scheme } = &self.scheme {
            scheme.validate()?;
        }
        Ok(())
    }

    /// Grid cells in a fixed order: `n`, `d`, `m`, `p`, `tau` nested.
    pub(crate) fn cells(&self) -> Vec<CellSpec> {
        let g = &self.grid;
        let mut out = Vec::new();
        let mut push = |n, d, m, p, tau| {
            let index = out.len();
            out.push(CellSpec { index, n, d, m, p, tau });
        };
        match &self.scheme {
            SchemeSpec::Custom { scheme } => {
                for &m in &g.m {
                    push(scheme.len(), scheme.dimension, m, scheme.max_p(), scheme.tau);
                }
            }
            spec => {
                let taus: &[f64] = if *spec == SchemeSpec::Bernoulli { &[0.0] } else { &g.tau };
                for &n in &g.n {
                    for &d in &g.d {
                        for &m in &g.m {
                            for &p in &g.p {
                                for &tau in taus {
                                    push(n, d, m, p, tau);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// The scheme of a cell, and its `tau = 0` counterpart for the p-floor
    /// when one exists.
    pub(crate) fn scheme_for(&self, c: &CellSpec, tau: f64) -> Scheme {
        match &self.scheme {
            SchemeSpec::Bernoulli => Scheme::bernoulli(c.n, c.p, c.d),
            SchemeSpec::Lattice => lattice_scheme(c.n, c.p, tau, c.d),
            SchemeSpec::Custom { scheme } => scheme.clone(),
        }
    }
}

/// `n` copies of `(1-p) U + p V` with `U` uniform on `{±tau e_k}` (or `E_0`
/// when `tau = 0`) and `V` uniform on the basis vectors `{e_k}`.
pub fn lattice_scheme(n: usize, p: f64, tau: f64, d: usize) -> Scheme {
    let basis = |k: usize, s: f64| {
        let mut e = vec![0.0; d];
        e[k] = s;
        e
    };
    let u = if tau == 0.0 {
        FiniteLaw::zero(d)
    } else {
        FiniteLaw::uniform((0..d).flat_map(|k| [basis(k, -tau), basis(k, tau)]).collect())
            .expect("nonempty atoms")
    };
    let v = FiniteLaw::uniform((0..d).map(|k| basis(k, 1.0)).collect()).expect("nonempty atoms");
    Scheme::new(tau, d, vec![MixtureFactor::new(p, u, v); n])
}

/// A `D**` that differs from both `D` and `D*`: `D_0 = prod_i e_4(H_i / 2)`
/// with `H_i = (1-p_i) U_i + p_i E_0` and jumps halved. Jumps stay in the
/// `tau/2`-ball, and for centred `U_i` the mean (0) and covariance
/// (`4 · E[H H^T] / 4`) match those of `prod_i H_i`.
pub fn dstarstar_instance(s: &Scheme) -> Result<ConvolutionLaw, DistributionError> {
    let mut d0 = Vec::with_capacity(s.len());
    for f in &s.factors {
        let halved = f.u_part().map_atoms(s.dimension, |x| x.iter().map(|v| v / 2.0).collect());
        d0.push(Component::CompoundPoisson(CompoundPoissonLaw::new(halved, 4.0)?));
    }
    build_dstarstar(s, &ConvolutionLaw::new(s.dimension, d0)?)
}
