//! Poissonization: `T = sum_i sum_{j <= nu_i} f(Y_ij)` with `nu_i ~ Poisson(1)`
//! shares its counts with the recentred `T* = T - Δ`,
//! `Δ = sum_i (nu_i - 1) a_i`, so `L(T) = D` and `L(T*) = D̄` are coupled.
//! On the event `|<Δ, t_j>| < λ` for all `j`, `T ∈ P` implies `T* ∈ P_λ` and
//! `T* ∈ P_λ` implies `T ∈ P_{2λ}`, which gives the two sandwich inequalities
//! checked here.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::RunManifest;
use super::HarnessError;
use crate::distributions::{FiniteLaw, Samplable};
use crate::linalg::{dot, norm};
use crate::metrics::DEFAULT_DELTA;
use crate::polyhedra::Polyhedron;
use crate::rng::RngStream;

/// Samples per parallel chunk; each chunk has its own child stream.
const CHUNK: usize = 4096;

/// `2 exp(-λ² / (2 (V + W λ / 3)))` with `V = sum w_i²` and `W = max |w_i|`,
/// clamped to 1: a tail bound for `|sum_i w_i (nu_i - 1)|` with `nu_i` iid
/// Poisson(1).
pub fn bernstein_tail(weights: &[f64], lambda: f64) -> f64 {
    let v: f64 = weights.iter().map(|w| w * w).sum();
    let w = weights.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let denom = 2.0 * (v + w * lambda / 3.0);
    if denom == 0.0 {
        return 1.0;
    }
    (2.0 * (-lambda * lambda / denom).exp()).min(1.0)
}

/// One Poissonization instance: the laws of `f(Y_i)`, the shifts `a_i`, and
/// the polyhedron `P = {x : <x, t_j> <= b_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonizationInstance {
    pub dimension: usize,
    pub factors: Vec<FiniteLaw>,
    pub shifts: Vec<Vec<f64>>,
    pub directions: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    pub lambdas: Vec<f64>,
}

impl PoissonizationInstance {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::InvalidConfig(m));
        let d = self.dimension;
        if self.factors.is_empty() || self.factors.len() != self.shifts.len() {
            return bad("need one shift per factor and at least one factor".into());
        }
        if self.factors.iter().any(|f| f.dimension() != d) || self.shifts.iter().any(|a| a.len() != d) {
            return bad("factor or shift dimension differs from the instance dimension".into());
        }
        if self.shifts.iter().flatten().any(|v| !v.is_finite()) {
            return bad("shifts must be finite".into());
        }
        if self.directions.is_empty() || self.directions.len() != self.offsets.len() {
            return bad("need one offset per direction and at least one direction".into());
        }
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return bad("lambda grid must be nonempty and positive".into());
        }
        self.polyhedron()?;
        Ok(())
    }

    pub fn polyhedron(&self) -> Result<Polyhedron, HarnessError> {
        Ok(Polyhedron::new(self.directions.clone(), self.offsets.clone())?)
    }

    /// `w_i = <a_i, t>` for unit `t`.
    pub fn weights(&self, t: &[f64]) -> Vec<f64> {
        self.shifts.iter().map(|a| dot(a, t)).collect()
    }
}

/// A random instance with `d <= max_d`, `n <= max_n` factors of 2 to 4 atoms
/// in `[-1, 1]^d`, shifts in `[-1/2, 1/2]^d` and `m <= max_m` directions.
pub fn random_instance(stream: RngStream, max_d: usize, max_n: usize, max_m: usize) -> PoissonizationInstance {
    let mut rng = stream.rng();
    let d = rng.random_range(1..=max_d.max(1));
    let n = rng.random_range(1..=max_n.max(1));
    let m = rng.random_range(1..=max_m.max(1));
    let mut factors = Vec::with_capacity(n);
    let mut centre = vec![0.0; d];
    for _ in 0..n {
        let k = rng.random_range(2..=4);
        let atoms: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let law = FiniteLaw::from_weighted_points(d, atoms.iter().map(|a| a.as_slice()).zip(raw.iter().map(|w| w / total)));
        for (c, v) in centre.iter_mut().zip(law.mean()) {
            *c += v;
        }
        factors.push(law);
    }
    let shifts = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-0.5..0.5)).collect())
        .collect();
    let mut directions = Vec::with_capacity(m);
    let mut offsets = Vec::with_capacity(m);
    for _ in 0..m {
        let t = loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let r = norm(&v);
            if r > 1e-9 {
                break v.into_iter().map(|x| x / r).collect::<Vec<f64>>();
            }
        };
        let b = dot(&centre, &t) + rng.random_range(-0.5..1.0) * (n as f64).sqrt();
        directions.push(t);
        offsets.push(b);
    }
    PoissonizationInstance {
        dimension: d,
        factors,
        shifts,
        directions,
        offsets,
        lambdas: vec![0.1, 0.25, 0.5, 1.0, 2.0],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonizationRow {
    pub lambda: f64,
    /// `F{P}` from `S = sum_i f(Y_i)`.
    pub f_p: f64,
    /// `F{P_{2λ}}`.
    pub f_p2: f64,
    /// `D{P}` from `T`.
    pub d_p: f64,
    /// `D{P_{2λ}}`.
    pub d_p2: f64,
    /// `D̄{P_λ}` from `T*`.
    pub dbar_p1: f64,
    /// Empirical `P(|<Δ, t_j>| >= λ)` per direction.
    pub delta_tails: Vec<f64>,
    /// `bernstein_tail(<a_i, t_j>, λ)` per direction.
    pub bernstein: Vec<f64>,
    /// Hoeffding radius of every single probability estimate.
    pub radius: f64,
    /// Radius of each sandwich inequality (two probabilities plus `m` tails).
    pub conf_radius: f64,
    /// `D{P} - D̄{P_λ} - sum tails` (at most `conf_radius` when it holds).
    pub lower_gap: f64,
    /// `D̄{P_λ} - D{P_{2λ}} - sum tails`.
    pub upper_gap: f64,
    pub sandwich_ok: bool,
    /// Every empirical tail is at most Bernstein plus 4 standard errors.
    pub tail_ok: bool,
}

impl PoissonizationRow {
    pub const CSV_HEADER: &'static str = "instance,lambda,f_p,d_p,d_p_2lambda,dbar_p_lambda,lower_gap,upper_gap,estimate,conf_radius,bound_value,ratio,sandwich_ok,tail_ok";

    fn csv_row(&self, instance: usize) -> String {
        let est: f64 = self.delta_tails.iter().sum();
        let bound: f64 = self.bernstein.iter().sum();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            instance,
            self.lambda,
            self.f_p,
            self.d_p,
            self.d_p2,
            self.dbar_p1,
            self.lower_gap,
            self.upper_gap,
            est,
            self.conf_radius,
            bound,
            if bound > 0.0 { (est / bound).to_string() } else { String::new() },
            self.sandwich_ok,
            self.tail_ok
        )
    }
}

#[derive(Default, Clone)]
struct Counts {
    f_p: usize,
    d_p: usize,
    f_p2: Vec<usize>,
    d_p2: Vec<usize>,
    dbar_p1: Vec<usize>,
    tails: Vec<Vec<usize>>,
}

impl Counts {
    fn new(l: usize, m: usize) -> Self {
        Self {
            f_p2: vec![0; l],
            d_p2: vec![0; l],
            dbar_p1: vec![0; l],
            tails: vec![vec![0; m]; l],
            ..Self::default()
        }
    }

    fn merge(mut self, o: Counts) -> Counts {
        self.f_p += o.f_p;
        self.d_p += o.d_p;
        for k in 0..self.f_p2.len() {
            self.f_p2[k] += o.f_p2[k];
            self.d_p2[k] += o.d_p2[k];
            self.dbar_p1[k] += o.dbar_p1[k];
            for j in 0..self.tails[k].len() {
                self.tails[k][j] += o.tails[k][j];
            }
        }
        self
    }
}

fn simulate(
    inst: &PoissonizationInstance,
    p: &Polyhedron,
    inflated: &[(Polyhedron, Polyhedron)],
    stream: RngStream,
    count: usize,
) -> Counts {
    let d = inst.dimension;
    let (l, m) = (inst.lambdas.len(), inst.directions.len());
    let mut counts = Counts::new(l, m);
    let mut rng = stream.rng();
    let poisson = Poisson::new(1.0).expect("unit rate");
    let mut s = vec![0.0; d];
    let mut t = vec![0.0; d];
    let mut delta = vec![0.0; d];
    let mut tstar = vec![0.0; d];
    for _ in 0..count {
        s.iter_mut().for_each(|v| *v = 0.0);
        t.iter_mut().for_each(|v| *v = 0.0);
        delta.iter_mut().for_each(|v| *v = 0.0);
        for (law, a) in inst.factors.iter().zip(&inst.shifts) {
            law.add_sample(&mut rng, &mut s);
            let nu = poisson.sample(&mut rng) as u64;
            for _ in 0..nu {
                law.add_sample(&mut rng, &mut t);
            }
            let c = nu as f64 - 1.0;
            for k in 0..d {
                delta[k] += c * a[k];
            }
        }
        for k in 0..d {
            tstar[k] = t[k] - delta[k];
        }
        counts.f_p += p.contains_unchecked(&s) as usize;
        counts.d_p += p.contains_unchecked(&t) as usize;
        let proj: Vec<f64> = inst.directions.iter().map(|dir| dot(&delta, dir).abs()).collect();
        for (k, (p1, p2)) in inflated.iter().enumerate() {
            counts.f_p2[k] += p2.contains_unchecked(&s) as usize;
            counts.d_p2[k] += p2.contains_unchecked(&t) as usize;
            counts.dbar_p1[k] += p1.contains_unchecked(&tstar) as usize;
            let lambda = inst.lambdas[k];
            for (j, v) in proj.iter().enumerate() {
                counts.tails[k][j] += (*v >= lambda) as usize;
            }
        }
    }
    counts
}

/// Monte Carlo estimates of `F{P}`, `D{P}`, `D{P_{2λ}}`, `D̄{P_λ}` and the
/// `Δ`-tails over the λ grid, checked against both sandwich inequalities
/// within their confidence radii. A violation aborts with a diagnostic.
pub fn poissonization_experiment(
    instances: &[PoissonizationInstance],
    samples: usize,
    seed: u64,
) -> Result<RunManifest, HarnessError> {
    if samples == 0 {
        return Err(HarnessError::InvalidConfig("samples must be >= 1".into()));
    }
    let mut all_rows = Vec::with_capacity(instances.len());
    for (idx, inst) in instances.iter().enumerate() {
        inst.validate()?;
        all_rows.push(run_instance(inst, samples, RngStream::new(seed, idx as u64))?);
    }
    #[derive(Serialize)]
    struct Config<'a> {
        instances: &'a [PoissonizationInstance],
        samples: usize,
    }
    let mut manifest = RunManifest::new("poissonize", &Config { instances, samples }, seed);
    manifest.csv_header = PoissonizationRow::CSV_HEADER.to_string();
    for (idx, rows) in all_rows.iter().enumerate() {
        for r in rows {
            manifest.push(&serde_json::json!({ "instance": idx, "row": r }), r.csv_row(idx));
        }
    }
    let rows = all_rows.iter().flatten();
    manifest.checks = serde_json::json!({
        "sandwich_ok": rows.clone().all(|r| r.sandwich_ok),
        "tail_ok": rows.clone().all(|r| r.tail_ok),
    });
    Ok(manifest)
}

fn run_instance(
    inst: &PoissonizationInstance,
    samples: usize,
    stream: RngStream,
) -> Result<Vec<PoissonizationRow>, HarnessError> {
    let p = inst.polyhedron()?;
    let inflated = inst
        .lambdas
        .iter()
        .map(|&l| Ok((p.inflate(l)?, p.inflate(2.0 * l)?)))
        .collect::<Result<Vec<_>, HarnessError>>()?;
    let chunks = samples.div_ceil(CHUNK);
    let counts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let size = CHUNK.min(samples - c * CHUNK);
            simulate(inst, &p, &inflated, stream.child(c as u64), size)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(Counts::merge)
        .expect("at least one chunk");
    let (l, m) = (inst.lambdas.len(), inst.directions.len());
    let nf = samples as f64;
    // Two-sided Hoeffding bound, union over every probability estimated.
    let estimates = 2 + l * (3 + m);
    let radius = ((2.0 * estimates as f64 / DEFAULT_DELTA).ln() / (2.0 * nf)).sqrt();
    let conf_radius = (2 + m) as f64 * radius;
    let mut rows = Vec::with_capacity(l);
    for k in 0..l {
        let lambda = inst.lambdas[k];
        let delta_tails: Vec<f64> = counts.tails[k].iter().map(|&c| c as f64 / nf).collect();
        let bernstein: Vec<f64> = inst
            .directions
            .iter()
            .map(|t| bernstein_tail(&inst.weights(t), lambda))
            .collect();
        let tail_sum: f64 = delta_tails.iter().sum();
        let d_p = counts.d_p as f64 / nf;
        let d_p2 = counts.d_p2[k] as f64 / nf;
        let dbar_p1 = counts.dbar_p1[k] as f64 / nf;
        let lower_gap = d_p - dbar_p1 - tail_sum;
        let upper_gap = dbar_p1 - d_p2 - tail_sum;
        let tail_ok = delta_tails.iter().zip(&bernstein).all(|(&e, &b)| {
            let sigma = (e * (1.0 - e) / nf).sqrt().max(1.0 / nf);
            e <= b + 4.0 * sigma
        });
        let row = PoissonizationRow {
            lambda,
            f_p: counts.f_p as f64 / nf,
            f_p2: counts.f_p2[k] as f64 / nf,
            d_p,
            d_p2,
            dbar_p1,
            delta_tails,
            bernstein,
            radius,
            conf_radius,
            lower_gap,
            upper_gap,
            sandwich_ok: lower_gap <= conf_radius && upper_gap <= conf_radius,
            tail_ok,
        };
        if !row.sandwich_ok {
            return Err(HarnessError::SandwichViolation {
                lambda,
                detail: format!(
                    "D{{P}} = {d_p}, Dbar{{P_l}} = {dbar_p1}, D{{P_2l}} = {d_p2}, tails = {tail_sum}, radius = {conf_radius}"
                ),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}
