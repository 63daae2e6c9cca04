//! Exact (truncated) probability mass functions of convolution laws built
//! from finite-support pieces.

use super::{CompoundPoissonLaw, Component, ConvolutionLaw, DistributionError, FiniteLaw};
use crate::distributions::finite::GridAccumulator;

/// Default cap on the number of atoms of any intermediate pmf.
pub const DEFAULT_ATOM_CAP: usize = 2_000_000;

/// `P(N = k)` for `N ~ Poisson(rate)`, evaluated in log space.
pub fn poisson_pmf(rate: f64, k: u64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
    (-rate + k as f64 * rate.ln() - ln_fact).exp()
}

/// Poisson probabilities `P(N = k)` for `k = 0..` until the terms past the
/// mode fall below `1e-320`.
fn poisson_terms(rate: f64) -> Vec<f64> {
    let mut terms = Vec::new();
    let mut ln_fact = 0.0;
    let mut k = 0u64;
    loop {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let t = (-rate + k as f64 * rate.ln() - ln_fact).exp();
        terms.push(t);
        if k as f64 > rate && (t < 1e-320 || k > 100_000) {
            break;
        }
        k += 1;
    }
    terms
}

/// `P(N > k)` by direct summation of the upper terms.
pub fn poisson_upper_tail(rate: f64, k: u64) -> f64 {
    poisson_terms(rate)
        .iter()
        .skip(k as usize + 1)
        .rev()
        .sum()
}

/// Smallest `K` such that `P(N > K) <= eps`, found by direct summation of
/// the tail (suffix sums from the far end, so small tails are accurate).
pub fn poisson_truncation(rate: f64, eps: f64) -> u64 {
    let terms = poisson_terms(rate);
    let mut suffix = vec![0.0; terms.len() + 1];
    for k in (0..terms.len()).rev() {
        suffix[k] = suffix[k + 1] + terms[k];
    }
    (0..terms.len())
        .find(|&k| suffix[k + 1] <= eps)
        .unwrap_or(terms.len() - 1) as u64
}

impl CompoundPoissonLaw {
    /// `sum_{k<=K} P(N=k) H^{*k}` with `K = poisson_truncation(rate, eps)`;
    /// the missing mass is at most `eps`.
    pub fn truncated_pmf(&self, eps: f64, cap: usize) -> Result<FiniteLaw, DistributionError> {
        let dim = self.dimension();
        let k_max = poisson_truncation(self.rate(), eps);
        let mut acc = GridAccumulator::new(dim);
        let mut power = FiniteLaw::zero(dim);
        for k in 0..=k_max {
            let pk = poisson_pmf(self.rate(), k);
            for (x, w) in power.iter() {
                acc.add(x, pk * w);
            }
            if acc.len() > cap {
                return Err(DistributionError::SupportExplosion {
                    atoms: acc.len(),
                    cap,
                });
            }
            if k < k_max {
                power = power.convolve(self.base(), cap)?;
            }
        }
        Ok(acc.into_law())
    }
}

/// Exact pmf of a convolution law whose components are finite laws, shifts,
/// compound Poisson laws with finite bases, or degenerate Gaussians.
///
/// All compound Poisson components are first combined into one, using
/// `e_a(H_1) * e_b(H_2) = e_{a+b}((a H_1 + b H_2)/(a+b))`, and its Poisson
/// count is truncated at the smallest `K` whose tail is `<= tail_eps`. Jumps
/// of size zero are thinned out first (`e_r(q E_0 + (1-q) H) = e_{r(1-q)}(H)`),
/// so `e(E_0)` is exactly `E_0`. The returned law misses at most `tail_eps`
/// of mass.
pub fn exact_pmf(law: &ConvolutionLaw, tail_eps: f64) -> Result<FiniteLaw, DistributionError> {
    exact_pmf_with_cap(law, tail_eps, DEFAULT_ATOM_CAP)
}

pub fn exact_pmf_with_cap(
    law: &ConvolutionLaw,
    tail_eps: f64,
    cap: usize,
) -> Result<FiniteLaw, DistributionError> {
    if !(tail_eps > 0.0) {
        return Err(DistributionError::InvalidLaw(format!("tail_eps = {tail_eps}")));
    }
    let dim = law.dimension();
    let mut result = FiniteLaw::zero(dim);
    let mut poisson_parts: Vec<&CompoundPoissonLaw> = Vec::new();
    for c in law.components() {
        match c {
            Component::Finite(f) => result = result.convolve(f, cap)?,
            Component::Shift(a) => result = result.shifted(a),
            Component::Gaussian(g) => {
                if !g.is_degenerate() {
                    return Err(DistributionError::GaussianNotExact);
                }
                let m: Vec<f64> = g.mean().iter().copied().collect();
                result = result.shifted(&m);
            }
            Component::CompoundPoisson(cp) => poisson_parts.push(cp),
        }
    }
    if let Some(cp) = combine_compound_poisson(&poisson_parts)?.and_then(drop_zero_jumps) {
        let pmf = cp.truncated_pmf(tail_eps, cap)?;
        result = result.convolve(&pmf, cap)?;
    }
    Ok(result)
}

/// Removes the atom at the origin from the jump law, scaling the rate by the
/// remaining mass; `None` when every jump is zero.
fn drop_zero_jumps(cp: CompoundPoissonLaw) -> Option<CompoundPoissonLaw> {
    let base = cp.base();
    if base.atoms().all(|x| x.iter().any(|v| *v != 0.0)) {
        return Some(cp);
    }
    let kept: Vec<(&[f64], f64)> = base.iter().filter(|(x, _)| x.iter().any(|v| *v != 0.0)).collect();
    let mass: f64 = kept.iter().map(|(_, w)| w).sum();
    if kept.is_empty() || mass <= 0.0 {
        return None;
    }
    let thinned = FiniteLaw::from_weighted_points(base.dimension(), kept.into_iter().map(|(x, w)| (x, w / mass)));
    Some(CompoundPoissonLaw::new(thinned, cp.rate() * mass).expect("positive rate"))
}

/// Single compound Poisson law equal in distribution to the product.
pub fn combine_compound_poisson(
    parts: &[&CompoundPoissonLaw],
) -> Result<Option<CompoundPoissonLaw>, DistributionError> {
    match parts {
        [] => Ok(None),
        [one] => Ok(Some((*one).clone())),
        _ => {
            let total: f64 = parts.iter().map(|c| c.rate()).sum();
            let mix: Vec<(f64, &FiniteLaw)> =
                parts.iter().map(|c| (c.rate() / total, c.base())).collect();
            let base = mixture_unchecked(&mix);
            Ok(Some(CompoundPoissonLaw::new(base, total)?))
        }
    }
}

/// Mixture whose weights sum to 1 only up to rounding of `r_i / sum r`.
fn mixture_unchecked(parts: &[(f64, &FiniteLaw)]) -> FiniteLaw {
    let dim = parts[0].1.dimension();
    let mut acc = GridAccumulator::new(dim);
    for (w, law) in parts {
        for (x, lw) in law.iter() {
            acc.add(x, w * lw);
        }
    }
    acc.into_law()
}
