use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{CellSpec, ExperimentConfig, SchemeSpec};
use super::manifest::{opt, RunManifest};
use super::HarnessError;
use crate::distributions::{sample_law, Scheme};
use crate::metrics::{
    halfline_discrepancy, halfline_metric, EmpiricalMeasure, LineMeasure, Profiles, SetKind,
    DEFAULT_METRIC_TOL, LINE_BISECTION_TOL,
};
use crate::polyhedra::{random_family, OffsetMode};
use crate::rng::RngStream;

/// Truncation used for the exact one-dimensional laws.
const EXACT_TAIL_EPS: f64 = 1e-12;
/// Largest admissible max/min ratio spread over a decade sweep.
pub const SPREAD_LIMIT: f64 = 25.0;
/// A λ-profile is log-linear when Pearson's r is below this.
pub const PEARSON_LIMIT: f64 = -0.95;
/// Profile points count as above the floor when they exceed this multiple.
pub const FLOOR_FACTOR: f64 = 2.0;
/// Fewest pre-floor points for which a linear fit is informative.
pub const PROFILE_MIN_POINTS: usize = 3;

/// `tau (|ln tau| + 1)`, with value 0 at `tau = 0`.
pub fn tau_term(tau: f64) -> f64 {
    if tau == 0.0 {
        0.0
    } else {
        tau * (tau.ln().abs() + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// All half-lines, exact laws (`d = 1`, `m = 1`).
    Exact,
    /// Random polyhedron family and empirical measures.
    MonteCarlo,
}

impl Method {
    fn as_str(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub lambda: f64,
    pub value: f64,
    /// The `tau = 0` discrepancy at the same `λ` (exact path only).
    pub floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: usize,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub p: f64,
    pub tau: f64,
    pub approximant: String,
    pub kind: SetKind,
    pub method: Method,
    pub estimate: Option<f64>,
    pub conf_radius: Option<f64>,
    pub bound_value: f64,
    /// `estimate / bound_value`; absent when the bound is 0.
    pub ratio: Option<f64>,
    pub family_size: Option<usize>,
    pub profile: Vec<ProfilePoint>,
    /// Set when the cell failed; the other estimates are then absent.
    pub failure: Option<String>,
}

impl CellResult {
    pub const CSV_HEADER: &'static str =
        "cell,n,d,m,p,tau,approximant,kind,method,estimate,conf_radius,bound_value,ratio,family_size,status";

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.cell,
            self.n,
            self.d,
            self.m,
            self.p,
            self.tau,
            self.approximant,
            self.kind.as_str(),
            self.method.as_str(),
            opt(self.estimate),
            opt(self.conf_radius),
            self.bound_value,
            opt(self.ratio),
            self.family_size.map(|v| v.to_string()).unwrap_or_default(),
            if self.failure.is_some() { "failed" } else { "ok" },
        )
    }
}

struct Estimate {
    value: f64,
    radius: f64,
    family_size: Option<usize>,
    profile: Vec<ProfilePoint>,
}

fn lambdas(tau: f64, steps: usize) -> Vec<f64> {
    if tau > 0.0 {
        (0..=steps).map(|k| k as f64 * tau).collect()
    } else {
        Vec::new()
    }
}

fn exact_line(config: &ExperimentConfig, s: &Scheme) -> Result<(LineMeasure, LineMeasure), HarnessError> {
    let f = LineMeasure::from_law(&s.product_law(), EXACT_TAIL_EPS)?;
    let a = LineMeasure::from_law(&config.approximant.build(s)?, EXACT_TAIL_EPS)?;
    Ok((f, a))
}

fn estimate_exact(config: &ExperimentConfig, c: &CellSpec) -> Result<Estimate, HarnessError> {
    let s = config.scheme_for(c, c.tau);
    let (f, a) = exact_line(config, &s)?;
    let value = halfline_metric(&f, &a, LINE_BISECTION_TOL)?;
    let floor = match (&config.scheme, c.tau > 0.0) {
        (SchemeSpec::Custom { .. }, _) | (_, false) => None,
        _ => Some(exact_line(config, &config.scheme_for(c, 0.0))?),
    };
    let mut profile = Vec::new();
    for lambda in lambdas(c.tau, config.profile_steps) {
        profile.push(ProfilePoint {
            lambda,
            value: halfline_discrepancy(&f, &a, lambda)?,
            floor: match &floor {
                Some((f0, a0)) => Some(halfline_discrepancy(f0, a0, lambda)?),
                None => None,
            },
        });
    }
    Ok(Estimate {
        value,
        radius: 0.0,
        family_size: None,
        profile,
    })
}

fn estimate_monte_carlo(config: &ExperimentConfig, c: &CellSpec) -> Result<Estimate, HarnessError> {
    let s = config.scheme_for(c, c.tau);
    let law = config.approximant.build(&s)?;
    let stream = RngStream::new(config.seed, c.index as u64);
    let fs = crate::distributions::sample_scheme(&s, stream.child(0), config.samples)?;
    let gs = sample_law(&law, stream.child(1), config.samples);
    let family = random_family(
        c.m,
        c.d,
        config.family.size,
        stream.child(2),
        OffsetMode::Quantiles(&fs),
    )?;
    let fe = EmpiricalMeasure::new(c.d, fs)?;
    let ge = EmpiricalMeasure::new(c.d, gs)?;
    let profiles = Profiles::build(&fe, &ge, &family, config.family.kind)?;
    let value = profiles.metric(DEFAULT_METRIC_TOL)?;
    let mut profile = Vec::new();
    for lambda in lambdas(c.tau, config.profile_steps) {
        profile.push(ProfilePoint {
            lambda,
            value: profiles.evaluate(lambda)?.value,
            floor: None,
        });
    }
    Ok(Estimate {
        value,
        radius: profiles.confidence_radius(),
        family_size: Some(family.len()),
        profile,
    })
}

fn evaluate_cell(config: &ExperimentConfig, c: &CellSpec) -> CellResult {
    let method = if c.d == 1 && c.m == 1 {
        Method::Exact
    } else {
        Method::MonteCarlo
    };
    let bound_value = c.p + tau_term(c.tau);
    let result = match method {
        Method::Exact => estimate_exact(config, c),
        Method::MonteCarlo => estimate_monte_carlo(config, c),
    };
    let mut cell = CellResult {
        cell: c.index,
        n: c.n,
        d: c.d,
        m: c.m,
        p: c.p,
        tau: c.tau,
        approximant: config.approximant.as_str().to_string(),
        kind: config.family.kind,
        method,
        estimate: None,
        conf_radius: None,
        bound_value,
        ratio: None,
        family_size: None,
        profile: Vec::new(),
        failure: None,
    };
    match result {
        Ok(e) => {
            cell.estimate = Some(e.value);
            cell.conf_radius = Some(e.radius);
            cell.ratio = (bound_value > 0.0).then(|| e.value / bound_value);
            cell.family_size = e.family_size;
            cell.profile = e.profile;
        }
        Err(e) => cell.failure = Some(e.to_string()),
    }
    cell
}

/// Spread of ratios over one decade sweep of a single parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadCheck {
    /// `"p"` or `"tau"`.
    pub axis: String,
    /// Cell indices of the sweep, in grid order.
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
    pub spread: f64,
    pub ok: bool,
}

/// Log-linearity of one λ-profile before it reaches the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCheck {
    pub cell: usize,
    pub points_used: usize,
    pub pearson: Option<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeReport {
    pub spreads: Vec<SpreadCheck>,
    pub profiles: Vec<ProfileCheck>,
    pub spread_ok: bool,
    pub profile_ok: bool,
}

/// Pearson correlation of two equal-length samples (`None` if either is
/// constant or shorter than 2).
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Decade windows of an axis: for every grid value `v`, the grid values in
/// `[v / 10, v]`, keeping windows with at least two values.
fn decade_windows(values: &[f64]) -> Vec<Vec<f64>> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.dedup();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for &top in &sorted {
        let w: Vec<f64> = sorted.iter().copied().filter(|v| *v <= top && *v >= top / 10.0 * (1.0 - 1e-12)).collect();
        if w.len() >= 2 && !out.iter().any(|o| w.iter().all(|v| o.contains(v))) {
            out.push(w);
        }
    }
    out
}

fn spread_checks(cells: &[CellResult], axis: &str) -> Vec<SpreadCheck> {
    let key = |c: &CellResult| -> (usize, usize, usize, u64) {
        let other = if axis == "p" { c.tau } else { c.p };
        (c.n, c.d, c.m, other.to_bits())
    };
    let coord = |c: &CellResult| if axis == "p" { c.p } else { c.tau };
    let mut groups: Vec<((usize, usize, usize, u64), Vec<&CellResult>)> = Vec::new();
    for c in cells {
        match groups.iter_mut().find(|g| g.0 == key(c)) {
            Some(g) => g.1.push(c),
            None => groups.push((key(c), vec![c])),
        }
    }
    let mut out = Vec::new();
    for (_, group) in groups {
        let axis_values: Vec<f64> = group.iter().map(|c| coord(c)).collect();
        for window in decade_windows(&axis_values) {
            let members: Vec<&CellResult> = group
                .iter()
                .copied()
                .filter(|c| window.contains(&coord(c)))
                .collect();
            let ratios: Vec<f64> = members.iter().filter_map(|c| c.ratio).collect();
            let spread = if ratios.len() < members.len() {
                f64::INFINITY
            } else {
                let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                hi / lo
            };
            out.push(SpreadCheck {
                axis: axis.to_string(),
                cells: members.iter().map(|c| c.cell).collect(),
                values: members.iter().map(|c| coord(c)).collect(),
                spread,
                ok: spread < SPREAD_LIMIT,
            });
        }
    }
    out
}

fn profile_check(c: &CellResult) -> ProfileCheck {
    let noise = c.conf_radius.unwrap_or(0.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for pt in &c.profile {
        let floor = FLOOR_FACTOR * pt.floor.unwrap_or(0.0).max(noise);
        if !(pt.value > floor) {
            break;
        }
        xs.push(pt.lambda);
        ys.push(pt.value.ln());
    }
    let r = if xs.len() >= PROFILE_MIN_POINTS {
        pearson(&xs, &ys)
    } else {
        None
    };
    ProfileCheck {
        cell: c.cell,
        points_used: xs.len(),
        pearson: r,
        ok: r.is_some_and(|r| r < PEARSON_LIMIT),
    }
}

/// Ratio spreads over every decade sweep of `p` (fixed `tau`) and of
/// `tau > 0` (fixed `p`), and log-linearity of every `tau > 0` λ-profile
/// up to the floor. The floor is `FLOOR_FACTOR` times the larger of the
/// `tau = 0` discrepancy at the same λ and the confidence radius. A
/// profile needs `PROFILE_MIN_POINTS` points above it to pass.
pub fn analyze_shape(cells: &[CellResult]) -> ShapeReport {
    let ok: Vec<CellResult> = cells.iter().filter(|c| c.failure.is_none()).cloned().collect();
    let mut spreads = spread_checks(&ok, "p");
    spreads.extend(spread_checks(&ok, "tau"));
    let profiles: Vec<ProfileCheck> = ok
        .iter()
        .filter(|c| c.tau > 0.0 && !c.profile.is_empty())
        .map(profile_check)
        .collect();
    ShapeReport {
        spread_ok: spreads.iter().all(|s| s.ok) && ok.len() == cells.len(),
        profile_ok: profiles.iter().all(|p| p.ok),
        spreads,
        profiles,
    }
}

/// Evaluates every grid cell (in parallel, merged in cell order), then runs
/// the post-hoc shape checks. Failed cells are kept with a failure marker.
pub fn run_bound_sweep(config: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    config.validate()?;
    let cells: Vec<CellResult> = config
        .cells()
        .par_iter()
        .map(|c| evaluate_cell(config, c))
        .collect();
    let report = analyze_shape(&cells);
    let mut manifest = RunManifest::new("sweep", config, config.seed);
    manifest.csv_header = CellResult::CSV_HEADER.to_string();
    for c in &cells {
        manifest.push(c, c.csv_row());
    }
    manifest.checks = serde_json::to_value(&report)?;
    Ok(manifest)
}
