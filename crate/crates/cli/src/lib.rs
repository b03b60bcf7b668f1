//! Command-line front end: `delta`, `transport` (and `transport eval`) and
//! `weyl`, each producing a JSON report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use spectral_transport::circle::{self, CircleHomeomorphism};
use spectral_transport::convex::{self, TubeOptions};
use spectral_transport::interval::{increasing_rearrangement, TransportMap1D};
use spectral_transport::io::{parse_json, to_json, MapDoc, MatrixDoc, Measure, MeasureDoc, Report};
use spectral_transport::matching::cyclic_bottleneck_match;
use spectral_transport::measure::{self, delta_cdf_interval, CdfMeasure, EmpiricalMeasure};
use spectral_transport::spectral::{self, LipschitzFn, MatrixClass, NormalMatrix};
use spectral_transport::{Certificate, Error, Space};

pub const SEED_ENV: &str = "SPECTRAL_TRANSPORT_SEED";
pub const DEFAULT_DEPTH: u32 = 8;
pub const DEFAULT_BODY_EPSILON: f64 = 0.25;
pub const DEFAULT_POINT_EPSILON: f64 = 0.05;
pub const DEFAULT_BUDGET: usize = 20_000;
/// Tolerance of the equality certificates on exact constructions.
pub const EXACT_TOLERANCE: f64 = 1e-12;
pub const REALIZING_TOLERANCE: f64 = 1e-8;
pub const LOWER_BOUND_TOLERANCE: f64 = 1e-6;

const OPTIMIZER_HELP: &str = "\
The orbit search spends its budget (objective evaluations) in three stages:
  1. exploration from the identity and one Haar-random start: a (1+1)
     evolution strategy on the Schatten-8 norm of u a u* - b (step 0.3,
     growth 1.5 on success, shrink 1.5^-1/4 on failure, Cayley steps), then
     a (1+1)-CMA-ES on the operator norm (20% of the budget);
  2. four exchange searches from Haar-random starts: 2000 evaluations
     aligning u by the Frobenius norm, then moves permuting up to 4 singular
     directions of the residual, accepted while the decreasing list of
     singular values drops lexicographically, then a 300-evaluation polish;
  3. an operator-norm CMA-ES polish of the best point (the rest).
Candidates are accepted only when they improve. Seeds derive from --seed
(overridden by SPECTRAL_TRANSPORT_SEED).";

#[derive(Debug, Parser)]
#[command(name = "spectral-transport", version, about = "Optimal matching distance, transport homeomorphisms and unitary orbit distances")]
pub struct Cli {
    /// Print the JSON report on standard output instead of the summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the JSON report to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Write the command's data series as CSV to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub dump_series: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimal matching distance between two measures.
    Delta(DeltaArgs),
    /// Homeomorphism pushing measure A onto measure B.
    Transport(TransportArgs),
    /// Eigenvalue matching distance between two normal matrices.
    #[command(after_help = OPTIMIZER_HELP)]
    Weyl(WeylArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceKind {
    Interval,
    Circle,
    Convex,
}

impl SpaceKind {
    fn name(self) -> &'static str {
        match self {
            SpaceKind::Interval => "interval",
            SpaceKind::Circle => "circle",
            SpaceKind::Convex => "convex",
        }
    }
}

#[derive(Debug, Args)]
pub struct DeltaArgs {
    #[arg(long, value_enum)]
    pub space: SpaceKind,
    #[arg(long, value_name = "FILE")]
    pub a: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub b: PathBuf,
    /// Discretization depth for diffuse circle measures.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Discretization scale for densities on a convex body.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true, subcommand_negates_reqs = true)]
pub struct TransportArgs {
    #[command(subcommand)]
    pub eval: Option<TransportCommand>,
    #[arg(long, value_enum, required = true)]
    pub space: Option<SpaceKind>,
    /// Source measure.
    #[arg(long, value_name = "FILE", required = true)]
    pub a: Option<PathBuf>,
    /// Target measure.
    #[arg(long, value_name = "FILE", required = true)]
    pub b: Option<PathBuf>,
    /// Discretization depth for diffuse circle measures.
    #[arg(long)]
    pub depth: Option<u32>,
    /// Scale ε: displacement slack for finite sets in a convex body, or the
    /// discretization scale for densities.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Write the transport map to this file.
    #[arg(long, value_name = "FILE")]
    pub map_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum TransportCommand {
    /// Evaluate a saved transport map at a point.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    pub map: PathBuf,
    /// Comma-separated coordinates (an angle on the circle).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub point: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct WeylArgs {
    #[arg(long, value_name = "FILE")]
    pub a: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub b: PathBuf,
    /// Run the numerical orbit search.
    #[arg(long)]
    pub minimize: bool,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON list of 1-Lipschitz functions to probe the spectra with.
    #[arg(long, value_name = "FILE")]
    pub probe: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    /// 2 malformed input, 3 space mismatch, 4 construction failure,
    /// 5 normality defect, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e {
                Error::Parse(_)
                | Error::Invalid { .. }
                | Error::MalformedCdf(_)
                | Error::NotLipschitz { .. }
                | Error::EpsilonTooSmall { .. }
                | Error::Unsupported(_) => 2,
                Error::SpaceMismatch(_) | Error::SizeMismatch { .. } => 3,
                Error::ConstructionFailure { .. } | Error::Numerical(_) => 4,
                Error::NotNormal { .. } => 5,
            },
            CliError::Input { .. } => 2,
            CliError::Output { .. } => 1,
        }
    }
}

/// Result of one invocation before it is printed.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    /// `key = value` lines for standard output.
    pub summary: Vec<(String, String)>,
    pub series: Series,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Series {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    fn new(header: &[&str]) -> Self {
        Series {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn new() -> Self {
        Inputs { hasher: Sha256::new() }
    }

    fn read(&mut self, label: &str, path: &Path) -> Result<String, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        self.hasher.update(label.as_bytes());
        self.hasher.update((text.len() as u64).to_le_bytes());
        self.hasher.update(text.as_bytes());
        Ok(text)
    }

    fn digest(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

fn with_path<T>(path: &Path, r: Result<T, Error>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        Error::Parse(message) => CliError::Input {
            path: path.display().to_string(),
            message,
        },
        other => CliError::Core(other),
    })
}

fn load_measure(inputs: &mut Inputs, label: &str, path: &Path) -> Result<Measure, CliError> {
    let text = inputs.read(label, path)?;
    with_path(path, parse_json::<MeasureDoc>(&text).and_then(|d| d.to_measure()))
}

fn load_matrix(inputs: &mut Inputs, label: &str, path: &Path) -> Result<NormalMatrix, CliError> {
    let text = inputs.read(label, path)?;
    with_path(path, parse_json::<MatrixDoc>(&text).and_then(|d| d.to_matrix()))
}

fn check_spaces(kind: SpaceKind, a: &Measure, b: &Measure) -> Result<Space, CliError> {
    for (label, m) in [("a", a), ("b", b)] {
        if m.space().kind_name() != kind.name() {
            return Err(Error::SpaceMismatch(format!(
                "--space {} but measure {label} lives on a {}",
                kind.name(),
                m.space().kind_name()
            ))
            .into());
        }
    }
    if a.space() != b.space() {
        return Err(Error::SpaceMismatch(format!("{:?} vs {:?}", a.space(), b.space())).into());
    }
    if a.kind_name() != b.kind_name() {
        return Err(Error::Invalid {
            field: "kind",
            reason: format!("measures must share a kind, got {} and {}", a.kind_name(), b.kind_name()),
        }
        .into());
    }
    Ok(a.space())
}

fn reject(flag: &'static str, given: bool, reason: &str) -> Result<(), CliError> {
    if given {
        return Err(Error::Invalid {
            field: flag,
            reason: reason.into(),
        }
        .into());
    }
    Ok(())
}

fn seed_override(flag: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Input {
            path: SEED_ENV.into(),
            message: format!("`{v}` is not an unsigned integer"),
        }),
        Err(_) => Ok(flag),
    }
}

fn fmt(x: f64) -> String {
    format!("{x:?}")
}

/// Runs a parsed command line. `argv` is echoed in the report.
pub fn run(cli: &Cli, argv: &[String]) -> Result<Outcome, CliError> {
    let mut inputs = Inputs::new();
    let (command, seed, outputs, certificates, summary, series) = match &cli.command {
        Command::Delta(args) => {
            let (o, c, s, series) = delta(args, &mut inputs)?;
            ("delta", None, o, c, s, series)
        }
        Command::Transport(args) => match &args.eval {
            Some(TransportCommand::Eval(e)) => {
                let (o, s, series) = eval(e, &mut inputs)?;
                ("transport eval", None, o, Vec::new(), s, series)
            }
            None => {
                let (o, c, s, series) = transport(args, &mut inputs)?;
                ("transport", None, o, c, s, series)
            }
        },
        Command::Weyl(args) => {
            let seed = if args.minimize { Some(seed_override(args.seed)?) } else { None };
            let (o, c, s, series) = weyl(args, seed, &mut inputs)?;
            ("weyl", seed, o, c, s, series)
        }
    };
    let report = Report {
        command: command.into(),
        arguments: argv.to_vec(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        inputs_digest: inputs.digest(),
        outputs,
        certificates,
    };
    Ok(Outcome {
        report,
        summary,
        series,
    })
}

type Step = (Value, Vec<Certificate>, Vec<(String, String)>, Series);

fn delta(args: &DeltaArgs, inputs: &mut Inputs) -> Result<Step, CliError> {
    let a = load_measure(inputs, "a", &args.a)?;
    let b = load_measure(inputs, "b", &args.b)?;
    let space = check_spaces(args.space, &a, &b)?;
    let mut certificates = Vec::new();
    let mut series;
    let outputs = match (&a, &b) {
        (Measure::Empirical(x), Measure::Empirical(y)) => {
            reject("depth", args.depth.is_some(), "only used for diffuse circle measures")?;
            reject("epsilon", args.epsilon.is_some(), "only used for densities on a convex body")?;
            let m = measure::optimal_matching(x, y)?;
            let w1 = measure::wasserstein1_empirical(x, y)?;
            let bound = (space.diameter() + 1.0) * m.bottleneck_value;
            certificates.push(Certificate::le("W1 <= (diam + 1) * delta", w1, bound, EXACT_TOLERANCE));
            series = Series::new(&["i", "j", "distance"]);
            for (i, &j) in m.permutation.iter().enumerate() {
                let d = space.distance(&x.points()[i], &y.points()[j]);
                series.rows.push(vec![i as f64, j as f64, d]);
            }
            json!({
                "delta": m.bottleneck_value,
                "error_bound": 0.0,
                "wasserstein1": w1,
                "permutation": m.permutation,
                "points": x.len(),
            })
        }
        (Measure::Cdf { cdf: x, .. }, Measure::Cdf { cdf: y, .. }) => match space {
            Space::Interval { lo, hi } => {
                reject("depth", args.depth.is_some(), "interval distances are exact")?;
                reject("epsilon", args.epsilon.is_some(), "only used for densities on a convex body")?;
                let value = (hi - lo) * delta_cdf_interval(x, y);
                series = quantile_series(x, y, lo, hi);
                json!({ "delta": value, "error_bound": 0.0 })
            }
            Space::Circle { radius } => {
                reject("epsilon", args.epsilon.is_some(), "only used for densities on a convex body")?;
                let depth = args.depth.unwrap_or(DEFAULT_DEPTH);
                let e = measure::delta_circle(x, y, depth, radius)?;
                series = Series::new(&["depth", "estimate", "error_bound"]);
                series.rows.push(vec![depth as f64, e.estimate, e.error_bound]);
                json!({ "delta": e.estimate, "error_bound": e.error_bound, "depth": depth })
            }
            Space::Convex(_) => unreachable!("cdf measures are never convex"),
        },
        (Measure::Polynomial { body, density: x }, Measure::Polynomial { density: y, .. }) => {
            reject("depth", args.depth.is_some(), "only used for diffuse circle measures")?;
            let epsilon = args.epsilon.unwrap_or(DEFAULT_BODY_EPSILON);
            let e = convex::delta_body(x, y, body, epsilon, convex::DEFAULT_MAX_POINTS)?;
            series = Series::new(&["epsilon", "estimate", "error_bound"]);
            series.rows.push(vec![epsilon, e.estimate, e.error_bound]);
            json!({ "delta": e.estimate, "error_bound": e.error_bound, "epsilon": epsilon })
        }
        _ => unreachable!("kinds checked equal"),
    };
    let mut summary = vec![("delta".to_string(), fmt(outputs["delta"].as_f64().unwrap_or(f64::NAN)))];
    let bound = outputs["error_bound"].as_f64().unwrap_or(0.0);
    if bound > 0.0 {
        summary.push(("error_bound".into(), fmt(bound)));
    }
    Ok((outputs, certificates, summary, series))
}

fn quantile_series(x: &CdfMeasure, y: &CdfMeasure, lo: f64, hi: f64) -> Series {
    let mut levels: Vec<f64> = x.breakpoints().iter().chain(y.breakpoints()).map(|b| b.1).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut s = Series::new(&["level", "quantile_a", "quantile_b"]);
    for p in levels {
        s.rows.push(vec![p, lo + (hi - lo) * x.quantile(p), lo + (hi - lo) * y.quantile(p)]);
    }
    s
}

fn transport(args: &TransportArgs, inputs: &mut Inputs) -> Result<Step, CliError> {
    let (kind, pa, pb) = match (&args.space, &args.a, &args.b) {
        (Some(k), Some(a), Some(b)) => (*k, a, b),
        _ => unreachable!("clap requires --space, --a and --b"),
    };
    let a = load_measure(inputs, "a", pa)?;
    let b = load_measure(inputs, "b", pb)?;
    let space = check_spaces(kind, &a, &b)?;
    let mut certificates = Vec::new();
    let (doc, mut outputs) = match (&a, &b) {
        (Measure::Empirical(x), Measure::Empirical(y)) => {
            reject("depth", args.depth.is_some(), "only used for diffuse circle measures")?;
            empirical_transport(&space, x, y, args.epsilon, &mut certificates)?
        }
        (Measure::Cdf { cdf: nu, .. }, Measure::Cdf { cdf: mu, .. }) => {
            reject("epsilon", args.epsilon.is_some(), "only used on a convex body")?;
            match space {
                Space::Interval { lo, hi } => {
                    reject("depth", args.depth.is_some(), "interval transport is exact")?;
                    let map = increasing_rearrangement(mu, nu);
                    let delta = delta_cdf_interval(mu, nu);
                    let defect = map
                        .breakpoints()
                        .iter()
                        .map(|&(s, h)| (nu.cdf(s) - mu.cdf(h)).abs())
                        .fold(0.0, f64::max);
                    certificates.push(Certificate::eq("pushforward cdf defect at breakpoints", defect, 0.0, EXACT_TOLERANCE));
                    certificates.push(Certificate::eq(
                        "displacement == delta",
                        (hi - lo) * map.displacement(),
                        (hi - lo) * delta,
                        EXACT_TOLERANCE,
                    ));
                    let out = json!({
                        "displacement": (hi - lo) * map.displacement(),
                        "delta": (hi - lo) * delta,
                        "breakpoints": map.breakpoints().len(),
                    });
                    (MapDoc::Interval { lo, hi, map }, out)
                }
                Space::Circle { radius } => {
                    let depth = args.depth.unwrap_or(DEFAULT_DEPTH);
                    let (row, map) = circle::transport_row(mu, nu, depth, radius)?;
                    let check = circle::verify_approximate_transport(mu, nu, &[depth], radius)?;
                    certificates.extend(check.certificates);
                    let out = json!({
                        "displacement": row.anchor_displacement,
                        "sup_displacement": row.sup_displacement,
                        "pushforward_bound": row.pushforward_bound(),
                        "pushforward_estimate": row.pushforward_estimate,
                        "pushforward_error": row.pushforward_error,
                        "depth": depth,
                        "anchors": row.points,
                    });
                    (MapDoc::Circle { map }, out)
                }
                Space::Convex(_) => unreachable!("cdf measures are never convex"),
            }
        }
        (Measure::Polynomial { body, density: nu }, Measure::Polynomial { density: mu, .. }) => {
            reject("depth", args.depth.is_some(), "only used for diffuse circle measures")?;
            let epsilon = args.epsilon.unwrap_or(DEFAULT_BODY_EPSILON);
            let t = convex::approximate_transport_body(mu, nu, body, epsilon, convex::DEFAULT_MAX_POINTS, &TubeOptions::default())?;
            certificates.extend(t.certificates.clone());
            let out = json!({
                "displacement": t.map.global_displacement,
                "bottleneck": t.map.bottleneck,
                "pushforward_bound": t.pushforward_bound(),
                "points": t.points,
                "epsilon": epsilon,
                "swaps": t.map.swaps,
                "reroutes": t.map.reroutes,
            });
            (MapDoc::Convex { map: t.map }, out)
        }
        _ => unreachable!("kinds checked equal"),
    };
    if let Some(path) = &args.map_out {
        std::fs::write(path, to_json(&doc)).map_err(|e| CliError::Output {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        outputs["map_file"] = json!(path.display().to_string());
    }
    let series = map_series(&doc);
    let summary = vec![
        ("displacement".to_string(), fmt(outputs["displacement"].as_f64().unwrap_or(f64::NAN))),
        (
            "certificates".to_string(),
            if certificates.iter().all(|c| c.ok) { "ok".into() } else { "FAILED".into() },
        ),
    ];
    Ok((outputs, certificates, summary, series))
}

fn empirical_transport(
    space: &Space,
    x: &EmpiricalMeasure,
    y: &EmpiricalMeasure,
    epsilon: Option<f64>,
    certificates: &mut Vec<Certificate>,
) -> Result<(MapDoc, Value), CliError> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            left: x.len(),
            right: y.len(),
        }
        .into());
    }
    let delta = measure::delta_empirical(x, y)?;
    match space {
        Space::Interval { lo, hi } => {
            reject("epsilon", epsilon.is_some(), "interval transport is exact")?;
            let norm = |m: &EmpiricalMeasure| {
                let mut v: Vec<f64> = m.points().iter().map(|p| (p[0] - lo) / (hi - lo)).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let (s, t) = (norm(x), norm(y));
            let mut bps = vec![(0.0, 0.0)];
            bps.extend(s.iter().copied().zip(t.iter().copied()));
            bps.push((1.0, 1.0));
            let map = TransportMap1D::new(bps).map_err(|e| match e {
                Error::Invalid { reason, .. } => Error::Invalid {
                    field: "points",
                    reason: format!("points must be distinct and interior: {reason}"),
                },
                other => other,
            })?;
            let displacement = (hi - lo) * map.displacement();
            certificates.push(Certificate::eq("displacement == delta", displacement, delta, EXACT_TOLERANCE));
            Ok((MapDoc::Interval { lo: *lo, hi: *hi, map }, json!({ "displacement": displacement, "delta": delta })))
        }
        Space::Circle { radius } => {
            reject("epsilon", epsilon.is_some(), "circle transport of finite sets is exact")?;
            let sorted = |m: &EmpiricalMeasure| {
                let mut v: Vec<f64> = m.points().iter().map(|p| p[0]).collect();
                v.sort_by(f64::total_cmp);
                v
            };
            let (s, t) = (sorted(x), sorted(y));
            let map: CircleHomeomorphism = circle::homeomorphism_between(&s, &t, *radius)?;
            let hit = s
                .iter()
                .map(|&a| t.iter().map(|&b| spectral_transport::matching::circular_gap(map.eval(a), b)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            let shift = cyclic_bottleneck_match(&s, &t, *radius)?.shift;
            certificates.push(Certificate::eq("h(F) = G (angle defect)", hit, 0.0, 1e-9));
            certificates.push(Certificate::eq("displacement == delta", map.displacement(), delta, EXACT_TOLERANCE));
            certificates.push(Certificate::eq("sup displacement == anchor displacement", map.sup_displacement(), map.displacement(), 1e-9));
            Ok((
                MapDoc::Circle { map: map.clone() },
                json!({ "displacement": map.displacement(), "delta": delta, "shift": shift }),
            ))
        }
        Space::Convex(body) => {
            let epsilon = epsilon.unwrap_or(DEFAULT_POINT_EPSILON);
            let map = convex::build_tube_homeomorphism(body, x.points(), y.points(), epsilon, &TubeOptions::default())?;
            certificates.extend(map.certificates.clone());
            let out = json!({
                "displacement": map.global_displacement,
                "bottleneck": map.bottleneck,
                "delta": delta,
                "epsilon": epsilon,
                "swaps": map.swaps,
                "reroutes": map.reroutes,
                "grid_points": map.grid_points,
            });
            Ok((MapDoc::Convex { map }, out))
        }
    }
}

fn map_series(doc: &MapDoc) -> Series {
    match doc {
        MapDoc::Interval { lo, hi, map } => {
            let mut s = Series::new(&["x", "h_x"]);
            for &(a, b) in map.breakpoints() {
                s.rows.push(vec![lo + (hi - lo) * a, lo + (hi - lo) * b]);
            }
            s
        }
        MapDoc::Circle { map } => {
            let mut s = Series::new(&["angle", "lifted_image"]);
            for &(a, b) in map.anchors() {
                s.rows.push(vec![a, b]);
            }
            s
        }
        MapDoc::Convex { map } => {
            let mut header = vec!["path".to_string(), "vertex".to_string()];
            header.extend((0..map.dimension).map(|k| format!("x{k}")));
            let mut s = Series { header, rows: Vec::new() };
            for (i, path) in map.paths.iter().enumerate() {
                for (j, v) in path.iter().enumerate() {
                    let mut row = vec![i as f64, j as f64];
                    row.extend(v);
                    s.rows.push(row);
                }
            }
            s
        }
    }
}

fn eval(args: &EvalArgs, inputs: &mut Inputs) -> Result<(Value, Vec<(String, String)>, Series), CliError> {
    let text = inputs.read("map", &args.map)?;
    let doc: MapDoc = with_path(&args.map, parse_json(&text))?;
    let image = doc.eval(&args.point)?;
    let mut series = Series::new(&["coordinate", "point", "image"]);
    for (k, (p, q)) in args.point.iter().zip(&image).enumerate() {
        series.rows.push(vec![k as f64, *p, *q]);
    }
    let shown: Vec<String> = image.iter().map(|x| fmt(*x)).collect();
    Ok((
        json!({ "point": args.point, "image": image }),
        vec![("image".into(), shown.join(","))],
        series,
    ))
}

fn weyl(args: &WeylArgs, seed: Option<u64>, inputs: &mut Inputs) -> Result<Step, CliError> {
    let a = load_matrix(inputs, "a", &args.a)?;
    let b = load_matrix(inputs, "b", &args.b)?;
    let real = spectral::realizing_unitary(&a, &b)?;
    let delta = real.delta.value;
    let mut certificates = vec![Certificate::eq(
        "||u a u* - b|| == delta (realizing unitary)",
        real.achieved,
        delta,
        REALIZING_TOLERANCE,
    )];
    let sa = a.spectral_data().eigenvalues;
    let sb = b.spectral_data().eigenvalues;
    let mut outputs = json!({
        "n": a.n(),
        "delta": delta,
        "method": real.delta.method,
        "permutation": real.delta.permutation,
        "achieved": real.achieved,
        "normality_defect": [a.normality_defect(), b.normality_defect()],
        "eigenvalues_a": sa.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        "eigenvalues_b": sb.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
    });
    let mut summary = vec![("delta".to_string(), fmt(delta)), ("achieved".to_string(), fmt(real.achieved))];
    if args.minimize {
        let seed = seed.expect("seed resolved when minimizing");
        let search = spectral::minimize_orbit_distance(&a, &b, args.budget, seed)?;
        outputs["optimizer"] = json!({
            "best": search.best,
            "budget": args.budget,
            "evaluations": search.evaluations,
            "gap": search.best - delta,
        });
        let same = a.class() == b.class() && a.class() != MatrixClass::Normal;
        if same {
            certificates.push(Certificate::le(
                "delta <= optimizer best (lower bound for this class)",
                delta,
                search.best,
                LOWER_BOUND_TOLERANCE,
            ));
        }
        summary.push(("optimizer_best".into(), fmt(search.best)));
    }
    if let Some(path) = &args.probe {
        let text = inputs.read("probe", path)?;
        let family: Vec<LipschitzFn> = with_path(path, parse_json(&text))?;
        let probe = spectral::lipschitz_probe(&a, &b, &family)?;
        let mut table = String::new();
        for row in &probe.rows {
            let _ = write!(table, "{}={} ", row.name, fmt(row.value));
        }
        outputs["probe"] = json!({ "sup": probe.sup, "rows": probe.rows });
        certificates.push(probe.certificate);
        summary.push(("probe_sup".into(), fmt(probe.sup)));
    }
    let mut series = Series::new(&["i", "re_a", "im_a", "re_b", "im_b", "distance"]);
    for (i, &j) in real.delta.permutation.iter().enumerate() {
        series.rows.push(vec![i as f64, sa[i].re, sa[i].im, sb[j].re, sb[j].im, (sa[i] - sb[j]).norm()]);
    }
    Ok((outputs, certificates, summary, series))
}

/// Parses `argv`, runs the command and performs all output. Returns the exit
/// code.
pub fn main_with(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli, &argv[1..]) {
        Ok(outcome) => match emit(&cli, &outcome) {
            Ok(()) => {
                if outcome.report.ok() {
                    0
                } else {
                    eprintln!("error: some certificates failed");
                    1
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn emit(cli: &Cli, outcome: &Outcome) -> Result<(), CliError> {
    use std::io::Write;
    let report = to_json(&outcome.report);
    if let Some(path) = &cli.out {
        write_file(path, &(report.clone() + "\n"))?;
    }
    if let Some(path) = &cli.dump_series {
        write_file(path, &outcome.series.to_csv())?;
    }
    let mut text = String::new();
    if cli.json {
        let _ = writeln!(text, "{report}");
    } else {
        for (k, v) in &outcome.summary {
            let _ = writeln!(text, "{k} = {v}");
        }
        for c in &outcome.report.certificates {
            let _ = writeln!(
                text,
                "[{}] {}: {} {} {}",
                if c.ok { "ok" } else { "FAIL" },
                c.name,
                fmt(c.lhs),
                relation(c),
                fmt(c.rhs)
            );
        }
    }
    // A closed pipe on stdout is not an error worth reporting.
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    Ok(())
}

fn relation(c: &Certificate) -> &'static str {
    match c.relation {
        spectral_transport::Relation::LessEq => "<=",
        spectral_transport::Relation::Less => "<",
        spectral_transport::Relation::Equal => "==",
    }
}
