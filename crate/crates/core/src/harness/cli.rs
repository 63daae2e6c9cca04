//! Command-line front end. `run` parses arguments, runs one subcommand and
//! returns the process exit code.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use super::{
    lecam_experiment, poissonization_experiment, random_instance, run_bound_sweep, with_thread_pool,
    Approximant, ExperimentConfig, HarnessError, PoissonizationInstance, RunManifest, LECAM_TAIL_EPS,
};
use crate::distributions::{sample_law, FiniteLaw, Scheme};
use crate::metrics::{
    rho_m, EmpiricalMeasure, Measure, Profiles, SetKind, DEFAULT_METRIC_TOL,
};
use crate::polyhedra::{augment_cuts, random_family, vertices_2d, OffsetMode, Polyhedron, DEFAULT_TOL};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "accompany-lab", version, about = "Accompanying laws, polyhedral discrepancies and bound checks")]
pub struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file. CSV output also writes `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// JSON input: experiment config, scheme, or instance list.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Record wall-clock time in the manifest (breaks byte-identity).
    #[arg(long, global = true)]
    record_timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scheme JSON file against the mixture-scheme conditions.
    Validate {
        /// Scheme file (defaults to --config).
        scheme: Option<PathBuf>,
    },
    /// Draw samples from F or an approximant of a scheme.
    Sample(SampleArgs),
    /// Estimate L_m, π_m or ρ_m between two sources.
    Distance(DistanceArgs),
    /// Run the bound sweep described by --config (defaults otherwise).
    Sweep,
    /// Exact total variation between Binomial(n, p) and its accompanying law.
    Lecam(LecamArgs),
    /// Poissonization sandwich experiment.
    Poissonize(PoissonizeArgs),
    /// Planar cut augmentation of a polygon.
    Cuts(CutsArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    F,
    D,
    Dstar,
    Dstarstar,
    Dbar,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Scheme file (defaults to --config).
    #[arg(long)]
    scheme: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Target::F)]
    target: Target,
    #[arg(long, default_value_t = 1000)]
    count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricName {
    L,
    Pi,
    Rho,
}

#[derive(Debug, Args)]
struct DistanceArgs {
    /// `law:<finite law JSON>` or `<f|d|dstar|dstarstar|dbar>:<scheme JSON>`.
    #[arg(long)]
    left: String,
    #[arg(long)]
    right: String,
    #[arg(long, value_enum, default_value_t = MetricName::L)]
    metric: MetricName,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value_t = 100)]
    family_size: usize,
    /// Samples drawn from each scheme source.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(Debug, Args)]
struct LecamArgs {
    /// Comma-separated list of n.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,20,50")]
    n: Vec<usize>,
    /// Comma-separated list of p.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.05,0.1,0.2")]
    p: Vec<f64>,
    #[arg(long, default_value_t = LECAM_TAIL_EPS)]
    tail_eps: f64,
}

#[derive(Debug, Args)]
struct PoissonizeArgs {
    /// Random instances to generate when no --config is given.
    #[arg(long, default_value_t = 5)]
    instances: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

#[derive(Debug, Args)]
struct CutsArgs {
    #[arg(long, default_value_t = 0.09)]
    epsilon: f64,
    /// Polyhedron JSON in R^2 (defaults to the corner {x <= 0, y <= 0}).
    #[arg(long)]
    polygon: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    std::fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn input_path<'a>(explicit: &'a Option<PathBuf>, cli: &'a Cli, what: &str) -> Result<&'a Path, HarnessError> {
    explicit
        .as_deref()
        .or(cli.config.as_deref())
        .ok_or_else(|| HarnessError::Usage(format!("{what} file required (positional or --config)")))
}

fn emit(cli: &Cli, mut manifest: RunManifest, started: Instant) -> Result<(), HarnessError> {
    if cli.record_timing {
        manifest.wall_clock_seconds = Some(started.elapsed().as_secs_f64());
    }
    match (&cli.out, cli.format) {
        (Some(path), Format::Csv) => {
            write_file(path, &manifest.to_csv())?;
            let mut sidecar = path.clone().into_os_string();
            sidecar.push(".manifest.json");
            write_file(Path::new(&sidecar), &manifest.to_json())
        }
        (Some(path), Format::Json) => write_file(path, &manifest.to_json()),
        (None, Format::Csv) => {
            print!("{}", manifest.to_csv());
            Ok(())
        }
        (None, Format::Json) => {
            print!("{}", manifest.to_json());
            Ok(())
        }
    }
}

fn target_law(s: &Scheme, t: Target) -> Result<Option<crate::distributions::ConvolutionLaw>, HarnessError> {
    let a = match t {
        Target::F => return Ok(None),
        Target::D => Approximant::D,
        Target::Dstar => Approximant::Dstar,
        Target::Dstarstar => Approximant::Dstarstar,
        Target::Dbar => Approximant::Dbar,
    };
    Ok(Some(a.build(s)?))
}

fn draw(s: &Scheme, t: Target, stream: RngStream, count: usize) -> Result<Vec<Vec<f64>>, HarnessError> {
    Ok(match target_law(s, t)? {
        None => crate::distributions::sample_scheme(s, stream, count)?,
        Some(law) => sample_law(&law, stream, count),
    })
}

fn cmd_validate(cli: &Cli, scheme: &Option<PathBuf>) -> Result<RunManifest, HarnessError> {
    let path = input_path(scheme, cli, "scheme")?;
    let s: Scheme = read_json(path)?;
    s.validate()?;
    let mut m = RunManifest::new("validate", &s, 0);
    m.csv_header = "factors,dimension,tau,max_p,status".into();
    let row = format!("{},{},{},{},valid", s.len(), s.dimension, s.tau, s.max_p());
    m.push(&serde_json::json!({"factors": s.len(), "dimension": s.dimension, "tau": s.tau, "max_p": s.max_p(), "status": "valid"}), row);
    Ok(m)
}

fn cmd_sample(cli: &Cli, a: &SampleArgs, seed: u64) -> Result<RunManifest, HarnessError> {
    let s: Scheme = read_json(input_path(&a.scheme, cli, "scheme")?)?;
    let points = draw(&s, a.target, RngStream::new(seed, 0), a.count)?;
    #[derive(Serialize)]
    struct Cfg<'a> {
        scheme: &'a Scheme,
        target: &'a str,
        count: usize,
    }
    let target = format!("{:?}", a.target).to_lowercase();
    let mut m = RunManifest::new("sample", &Cfg { scheme: &s, target: &target, count: a.count }, seed);
    m.csv_header = (0..s.dimension).map(|k| format!("x{k}")).collect::<Vec<_>>().join(",");
    for x in &points {
        let row = x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        m.push(x, row);
    }
    Ok(m)
}

enum Source {
    Law(FiniteLaw),
    Samples(EmpiricalMeasure),
}

impl Source {
    fn measure(&self) -> &dyn MeasureDyn {
        match self {
            Source::Law(l) => l,
            Source::Samples(e) => e,
        }
    }
}

/// Object-safe view of [`Measure`] for mixing source kinds.
trait MeasureDyn: Sync {
    fn as_points(&self) -> Vec<Vec<f64>>;
}

impl<M: Measure> MeasureDyn for M {
    fn as_points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i).to_vec()).collect()
    }
}

fn parse_source(spec: &str, samples: usize, stream: RngStream) -> Result<Source, HarnessError> {
    let (kind, path) = spec
        .split_once(':')
        .ok_or_else(|| HarnessError::Usage(format!("source `{spec}` must look like kind:path")))?;
    let target = match kind {
        "law" => return Ok(Source::Law(read_json(Path::new(path))?)),
        "f" => Target::F,
        "d" => Target::D,
        "dstar" => Target::Dstar,
        "dstarstar" => Target::Dstarstar,
        "dbar" => Target::Dbar,
        other => return Err(HarnessError::Usage(format!("unknown source kind `{other}`"))),
    };
    let s: Scheme = read_json(Path::new(path))?;
    let pts = draw(&s, target, stream, samples)?;
    Ok(Source::Samples(EmpiricalMeasure::new(s.dimension, pts)?))
}

fn distance_between<G: Measure, H: Measure>(
    g: &G,
    h: &H,
    family: &[Polyhedron],
    metric: MetricName,
) -> Result<(f64, f64), HarnessError> {
    Ok(match metric {
        MetricName::Rho => {
            let p = Profiles::build(g, h, family, SetKind::Inflate)?;
            (rho_m(g, h, family)?, p.confidence_radius())
        }
        MetricName::L | MetricName::Pi => {
            let kind = if metric == MetricName::L { SetKind::Inflate } else { SetKind::Neighborhood };
            let p = Profiles::build(g, h, family, kind)?;
            (p.metric(DEFAULT_METRIC_TOL)?, p.confidence_radius())
        }
    })
}

fn cmd_distance(a: &DistanceArgs, seed: u64) -> Result<RunManifest, HarnessError> {
    if a.m == 0 || a.family_size == 0 || a.samples == 0 {
        return Err(HarnessError::Usage("m, family size and samples must be >= 1".into()));
    }
    let root = RngStream::new(seed, 0);
    let left = parse_source(&a.left, a.samples, root.child(0))?;
    let right = parse_source(&a.right, a.samples, root.child(1))?;
    let anchor = left.measure().as_points();
    let d = anchor.first().map(Vec::len).unwrap_or(0);
    let family = random_family(a.m, d, a.family_size, root.child(2), OffsetMode::Quantiles(&anchor))?;
    let (value, radius) = match (&left, &right) {
        (Source::Law(g), Source::Law(h)) => distance_between(g, h, &family, a.metric)?,
        (Source::Law(g), Source::Samples(h)) => distance_between(g, h, &family, a.metric)?,
        (Source::Samples(g), Source::Law(h)) => distance_between(g, h, &family, a.metric)?,
        (Source::Samples(g), Source::Samples(h)) => distance_between(g, h, &family, a.metric)?,
    };
    #[derive(Serialize)]
    struct Cfg<'a> {
        left: &'a str,
        right: &'a str,
        metric: &'a str,
        m: usize,
        family_size: usize,
        samples: usize,
    }
    let metric = format!("{:?}", a.metric).to_lowercase();
    let cfg = Cfg {
        left: &a.left,
        right: &a.right,
        metric: &metric,
        m: a.m,
        family_size: a.family_size,
        samples: a.samples,
    };
    let mut m = RunManifest::new("distance", &cfg, seed);
    m.csv_header = "metric,m,family_size,estimate,conf_radius,bound_value,ratio".into();
    let row = format!("{},{},{},{},{},,", metric, a.m, family.len(), value, radius);
    m.push(
        &serde_json::json!({"metric": metric, "m": a.m, "family_size": family.len(), "estimate": value, "conf_radius": radius}),
        row,
    );
    Ok(m)
}

fn cmd_sweep(cli: &Cli, seed: Option<u64>) -> Result<RunManifest, HarnessError> {
    let mut config: ExperimentConfig = match &cli.config {
        Some(p) => read_json(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    run_bound_sweep(&config)
}

fn cmd_poissonize(cli: &Cli, a: &PoissonizeArgs, seed: u64) -> Result<RunManifest, HarnessError> {
    let instances: Vec<PoissonizationInstance> = match &cli.config {
        Some(p) => {
            let v: serde_json::Value = read_json(p)?;
            if v.is_array() {
                serde_json::from_value(v)?
            } else {
                vec![serde_json::from_value(v)?]
            }
        }
        None => (0..a.instances)
            .map(|k| random_instance(RngStream::new(seed, 1 << 40).child(k as u64), 3, 10, 3))
            .collect(),
    };
    if instances.is_empty() {
        return Err(HarnessError::Usage("no instances".into()));
    }
    poissonization_experiment(&instances, a.samples, seed)
}

fn cmd_cuts(a: &CutsArgs) -> Result<RunManifest, HarnessError> {
    let p: Polyhedron = match &a.polygon {
        Some(path) => read_json(path)?,
        None => Polyhedron::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0])?,
    };
    let aug = augment_cuts(&p, a.epsilon)?;
    // Vertex oracle at λ = 1: the worst point of the inflated augmented
    // polygon is one of its vertices.
    let inflated = aug.inflate(1.0)?;
    let mut ratio: f64 = 0.0;
    for v in vertices_2d(&inflated)? {
        ratio = ratio.max(p.distance_to(&v, DEFAULT_TOL)?);
    }
    #[derive(Serialize)]
    struct Cfg<'a> {
        polygon: &'a Polyhedron,
        epsilon: f64,
    }
    let mut m = RunManifest::new("cuts", &Cfg { polygon: &p, epsilon: a.epsilon }, 0);
    m.csv_header = "kind,normal_x,normal_y,offset".into();
    let base = p.flattened();
    let rows = base
        .halfspaces()
        .iter()
        .map(|h| ("base", h))
        .chain(aug.cuts.iter().map(|h| ("cut", h)));
    for (kind, h) in rows {
        let row = format!("{},{},{},{}", kind, h.normal[0], h.normal[1], h.offset);
        m.push(&serde_json::json!({"kind": kind, "halfspace": h}), row);
    }
    m.checks = serde_json::json!({
        "m0": aug.m0(),
        "max_distance_ratio": ratio,
        "allowed": 1.0 + a.epsilon,
        "ok": ratio <= (1.0 + a.epsilon) * (1.0 + 1e-9),
    });
    Ok(m)
}

fn dispatch(cli: &Cli) -> Result<(), HarnessError> {
    let started = Instant::now();
    let seed = cli.seed.unwrap_or(0);
    let manifest = with_thread_pool(|| match &cli.command {
        Command::Validate { scheme } => cmd_validate(cli, scheme),
        Command::Sample(a) => cmd_sample(cli, a, seed),
        Command::Distance(a) => cmd_distance(a, seed),
        Command::Sweep => cmd_sweep(cli, cli.seed),
        Command::Lecam(a) => lecam_experiment(&a.n, &a.p, a.tail_eps),
        Command::Poissonize(a) => cmd_poissonize(cli, a, seed),
        Command::Cuts(a) => cmd_cuts(a),
    })??;
    emit(cli, manifest, started)
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code: 0 on success, 1 for usage or validation errors,
/// 2 for runtime failures.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
