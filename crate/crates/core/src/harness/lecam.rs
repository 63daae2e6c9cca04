use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::RunManifest;
use super::HarnessError;
use crate::distributions::{accompany, exact_pmf, Scheme};
use crate::metrics::tv_exact;

/// Poisson truncation for the exact `D` pmf.
pub const LECAM_TAIL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LecamRow {
    pub n: usize,
    pub p: f64,
    /// `rho_TV(Binomial(n, p), D)` with `D` truncated at the tail epsilon.
    pub tv: f64,
    /// `n p^2`.
    pub bound: f64,
    pub ratio: Option<f64>,
    /// `tv <= n p^2 + 2 tail_eps`.
    pub ok: bool,
}

impl LecamRow {
    pub const CSV_HEADER: &'static str = "n,p,estimate,conf_radius,bound_value,ratio,ok";

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},0,{},{},{}",
            self.n,
            self.p,
            self.tv,
            self.bound,
            super::manifest::opt(self.ratio),
            self.ok
        )
    }
}

#[derive(Serialize)]
struct LecamConfig<'a> {
    n: &'a [usize],
    p: &'a [f64],
    tail_eps: f64,
}

/// Exact total variation between `Binomial(n, p)` (the `n`-fold product of
/// Bernoulli factors) and `D = prod e(F_i)` for every `(n, p)` pair.
pub fn lecam_experiment(ns: &[usize], ps: &[f64], tail_eps: f64) -> Result<RunManifest, HarnessError> {
    if ns.is_empty() || ps.is_empty() {
        return Err(HarnessError::InvalidConfig("n and p grids must be nonempty".into()));
    }
    if let Some(p) = ps.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(HarnessError::InvalidConfig(format!("p = {p} is outside [0, 1]")));
    }
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(HarnessError::InvalidConfig(format!("tail_eps = {tail_eps}")));
    }
    let pairs: Vec<(usize, f64)> = ns.iter().flat_map(|&n| ps.iter().map(move |&p| (n, p))).collect();
    let rows = pairs
        .par_iter()
        .map(|&(n, p)| -> Result<LecamRow, HarnessError> {
            let s = Scheme::bernoulli(n, p, 1);
            let f = exact_pmf(&s.product_law(), tail_eps)?;
            let d = exact_pmf(&accompany(&s, false)?, tail_eps)?;
            let tv = tv_exact(&f, &d)?;
            let bound = n as f64 * p * p;
            Ok(LecamRow {
                n,
                p,
                tv,
                bound,
                ratio: (bound > 0.0).then(|| tv / bound),
                ok: tv <= bound + 2.0 * tail_eps,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let config = LecamConfig { n: ns, p: ps, tail_eps };
    let mut manifest = RunManifest::new("lecam", &config, 0);
    manifest.csv_header = LecamRow::CSV_HEADER.to_string();
    for r in &rows {
        manifest.push(r, r.csv_row());
    }
    manifest.checks = serde_json::json!({ "all_within_bound": rows.iter().all(|r| r.ok) });
    Ok(manifest)
}
