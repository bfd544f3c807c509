//! `pgf-clt`: normal-approximation diagnostics for probability generating
//! functions.

mod error;
mod input;
mod verify;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use pgf_clt::brownian::{
    estimate_exit_rectangle, estimate_exit_sector, estimate_square_crossing, rectangle_bound, sector_bound, SectorRoute,
};
use pgf_clt::clt::{verify_normal_approx, SweepRow};
use pgf_clt::constructions::{construct_ball_sharp, construct_sector_sharp, poisson_scaled, Generator, DEFAULT_BALL_CONSTANT};
use pgf_clt::dist::kolmogorov_distance;
use pgf_clt::multivariate::{
    covariance_stats, enumerate_directions, project, projection_sector_check, random_stable_product, StableProduct,
};
use pgf_clt::pgf::{find_roots, root_geometry, DEFAULT_ROOT_TOL};
use pgf_clt::{
    BoundReport, ConstructionResult, CovStats, DirectionVector, ExitEstimate, MultiPgf, RectangleSpec, RootGeometry, RootSet,
    SectorSpec, WosConfig,
};
use serde::{Deserialize, Serialize};

use error::CliError;

/// Environment variable fixing the worker-thread count.
const WORKERS_ENV: &str = "PGFCLT_WORKERS";
/// Above this many atoms `construct` prints the generator instead of the pmf.
const PMF_INLINE_LIMIT: usize = 100_000;

#[derive(Parser)]
#[command(name = "pgf-clt", version, about = "Normal approximation diagnostics for probability generating functions")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Exact Kolmogorov distance, root geometry and bounds for a PGF (or a
    /// batch of PGFs from --input).
    Analyze(PgfInput),
    /// Roots with multiplicities and their distance to 1.
    Roots {
        #[command(flatten)]
        pgf: PgfInput,
        /// Polishing tolerance.
        #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
        tol: f64,
    },
    /// Extremal families attaining the lower bounds.
    #[command(subcommand)]
    Construct(Construct),
    /// Walk-on-spheres exit probabilities.
    #[command(subcommand)]
    Brownian(Brownian),
    /// One-dimensional projections of a multivariate generating function.
    Project(ProjectArgs),
    /// Run a seeded invariant suite.
    Verify {
        #[arg(value_enum)]
        suite: verify::Suite,
        #[arg(long)]
        seed: Option<u64>,
        /// Instances (or samples per case for the planar suite).
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
}

#[derive(Args)]
struct PgfInput {
    /// Coefficients as a JSON array of numbers or decimal strings.
    #[arg(long, allow_hyphen_values = true)]
    coeffs: Option<String>,
    /// JSON file: coefficients, {"coeffs": [...]}, {"probs": [...], "span": k}
    /// or an array of any of these.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Divide by the coefficient sum instead of requiring it to be 1.
    #[arg(long)]
    normalize: bool,
}

#[derive(Subcommand)]
enum Construct {
    /// Sector-sharp family with standard deviation sigma and zero-free sector
    /// of half-angle delta.
    Sector {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Ball-sharp family k Binomial(n/k, p).
    Ball {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        sigma: f64,
        /// Constant in k = floor(log n / (c_k delta)).
        #[arg(long = "c-k", default_value_t = DEFAULT_BALL_CONSTANT)]
        c_k: f64,
    },
    /// Scaled Poisson family with growth exponent kappa.
    Poisson {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        kappa: f64,
        #[arg(long, default_value_t = 1e-12)]
        tail_tol: f64,
    },
}

#[derive(Args)]
struct Walks {
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    /// Required: stochastic commands never pick a seed themselves.
    #[arg(long)]
    seed: Option<u64>,
    /// Absorption shell, relative to the domain size.
    #[arg(long)]
    eps_abs: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Subcommand)]
enum Brownian {
    /// Exit through the left or right edge of the square [-delta, delta]^2
    /// from iy.
    Square {
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        y: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        #[command(flatten)]
        walks: Walks,
    },
    /// Exit through the ends |Re z| = half-width of a rectangle.
    Rectangle {
        #[arg(long)]
        half_width: f64,
        #[arg(long)]
        half_height: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        x: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        y: f64,
        #[command(flatten)]
        walks: Walks,
    },
    /// Exit through the arcs |z| = R^{+-1} of the sector |arg z| < delta.
    Sector {
        #[arg(long)]
        delta: f64,
        /// log R; the start has |log|z|| <= log r = 0 by default.
        #[arg(long = "logRr", alias = "log-r")]
        log_r: f64,
        /// Real starting point.
        #[arg(long, default_value_t = 1.0)]
        start: f64,
        #[arg(long, value_enum, default_value_t = Route::Direct)]
        route: Route,
        #[command(flatten)]
        walks: Walks,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Route {
    Direct,
    Conformal,
}

#[derive(Args)]
struct ProjectArgs {
    /// JSON file with a MultiPgf ({"dim", "terms": [{exponents, coeff}]}) or a
    /// stable product ({"dim", "forms": [[{c0, c}, power], ...]}).
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generate a random stable product in this many variables.
    #[arg(long)]
    random_dim: Option<usize>,
    /// Number of affine forms in the random product.
    #[arg(long, default_value_t = 4)]
    forms: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Direction such as 1,2; repeatable. Default: every v in {0..3}^d \ {0}.
    #[arg(long = "v", value_parser = input::direction)]
    directions: Vec<Vec<u32>>,
}

fn require_seed(seed: Option<u64>) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::precondition("--seed is required for stochastic commands"))
}

fn wos_config(w: &Walks) -> Result<WosConfig, CliError> {
    let mut cfg = WosConfig::new(require_seed(w.seed)?);
    if let Some(e) = w.eps_abs {
        cfg.epsilon_abs = e;
    }
    if let Some(m) = w.max_steps {
        cfg.max_steps = m;
    }
    Ok(cfg)
}

/// Rendered output: JSON text and, where it makes sense, CSV rows.
struct Rendered {
    json: String,
    csv: Option<Vec<u8>>,
}

fn render<T: Serialize, R: Serialize>(value: &T, rows: &[R]) -> Result<Rendered, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let csv = w.into_inner().map_err(|e| CliError::internal(e.to_string()))?;
    Ok(Rendered { json: serde_json::to_string_pretty(value)? + "\n", csv: Some(csv) })
}

#[derive(Serialize, Deserialize)]
struct RootsOutput {
    roots: RootSet,
    geometry: RootGeometry,
}

#[derive(Serialize)]
struct RootRow {
    re: f64,
    im: f64,
    multiplicity: usize,
}

/// A construction whose support is too large to print.
#[derive(Serialize, Deserialize)]
struct ConstructionSummary {
    generator: Generator,
    support: usize,
    k: u64,
    #[serde(with = "pgf_clt::decimal::scalar")]
    scale: f64,
    #[serde(with = "pgf_clt::decimal::scalar")]
    achieved_sigma: f64,
    #[serde(with = "pgf_clt::decimal::scalar")]
    achieved_delta: f64,
    #[serde(with = "pgf_clt::decimal::scalar")]
    lower_bound: f64,
}

#[derive(Serialize)]
struct PmfRow {
    value: f64,
    prob: f64,
}

#[derive(Serialize)]
struct SummaryRow {
    k: u64,
    scale: f64,
    support: usize,
    achieved_sigma: f64,
    achieved_delta: f64,
    lower_bound: f64,
}

#[derive(Serialize, Deserialize)]
struct BrownianOutput {
    estimate: ExitEstimate,
    /// Closed-form upper bound for the configuration, when one applies.
    #[serde(with = "pgf_clt::decimal::option")]
    bound: Option<f64>,
}

#[derive(Serialize)]
struct BrownianRow {
    p_hat: f64,
    stderr: f64,
    n_samples: u64,
    seed: u64,
    unabsorbed: u64,
    bound: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct DirectionOutput {
    v: DirectionVector,
    #[serde(with = "pgf_clt::decimal::scalar")]
    variance: f64,
    #[serde(rename = "D", with = "pgf_clt::decimal::option")]
    d: Option<f64>,
    /// Only for stable products, whose zeros are known to avoid the sector.
    sector_pass: Option<bool>,
    #[serde(with = "pgf_clt::decimal::option")]
    min_arg: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProjectOutput {
    dim: usize,
    stable: bool,
    covariance: CovStats,
    directions: Vec<DirectionOutput>,
}

#[derive(Serialize)]
struct DirectionRow {
    v: String,
    variance: f64,
    #[serde(rename = "D")]
    d: Option<f64>,
    sector_pass: Option<bool>,
    min_arg: Option<f64>,
}

#[derive(Serialize)]
struct VerifyRow {
    suite: String,
    seed: u64,
    cases: usize,
    failures: usize,
    worst: f64,
}

fn analyze(pgf: &PgfInput) -> Result<Rendered, CliError> {
    let polys = input::polys(pgf.coeffs.as_deref(), pgf.input.as_deref(), pgf.normalize)?;
    let reports: Vec<BoundReport> = polys.iter().map(verify_normal_approx).collect::<Result<_, _>>()?;
    let rows: Vec<SweepRow> = reports.iter().map(SweepRow::from).collect();
    if pgf.input.is_some() && polys.len() > 1 {
        render(&reports, &rows)
    } else {
        render(&reports[0], &rows)
    }
}

fn roots(pgf: &PgfInput, tol: f64) -> Result<Rendered, CliError> {
    let polys = input::polys(pgf.coeffs.as_deref(), pgf.input.as_deref(), pgf.normalize)?;
    if polys.len() != 1 {
        return Err(CliError::precondition("roots takes a single PGF"));
    }
    if !(tol > 0.0) {
        return Err(CliError::precondition("--tol must be positive"));
    }
    let roots = find_roots(&polys[0], tol)?;
    let geometry = root_geometry(&roots);
    let rows: Vec<RootRow> = roots.roots().iter().map(|(z, m)| RootRow { re: z.re, im: z.im, multiplicity: *m }).collect();
    render(&RootsOutput { roots, geometry }, &rows)
}

fn construct(c: &Construct) -> Result<Rendered, CliError> {
    let r: ConstructionResult = match *c {
        Construct::Sector { sigma, delta } => construct_sector_sharp(sigma, delta)?,
        Construct::Ball { n, delta, sigma, c_k } => construct_ball_sharp(n, delta, sigma, c_k)?,
        Construct::Poisson { sigma, kappa, tail_tol } => poisson_scaled(sigma, kappa, tail_tol)?,
    };
    let support = r.pmf.probs().len();
    if support > PMF_INLINE_LIMIT {
        let s = ConstructionSummary {
            generator: r.generator,
            support,
            k: r.k,
            scale: r.scale,
            achieved_sigma: r.achieved_sigma,
            achieved_delta: r.achieved_delta,
            lower_bound: r.lower_bound,
        };
        let row = SummaryRow { k: r.k, scale: r.scale, support, achieved_sigma: r.achieved_sigma, achieved_delta: r.achieved_delta, lower_bound: r.lower_bound };
        return render(&s, &[row]);
    }
    let step = r.pmf.span() as f64 * r.scale;
    let rows: Vec<PmfRow> = r.pmf.probs().iter().enumerate().map(|(i, &p)| PmfRow { value: i as f64 * step, prob: p }).collect();
    render(&r, &rows)
}

fn brownian(b: &Brownian) -> Result<Rendered, CliError> {
    let (estimate, bound) = match b {
        Brownian::Square { y, delta, walks } => {
            let e = estimate_square_crossing(*y, *delta, &wos_config(walks)?, walks.samples)?;
            (e, None)
        }
        Brownian::Rectangle { half_width, half_height, x, y, walks } => {
            let q = RectangleSpec::new(*half_width, *half_height)?;
            let e = estimate_exit_rectangle(Complex64::new(*x, *y), q, &wos_config(walks)?, walks.samples)?;
            (e, Some(rectangle_bound(x.abs(), &q)))
        }
        Brownian::Sector { delta, log_r, start, route, walks } => {
            let r_outer = log_r.exp();
            let s = SectorSpec::symmetric(*delta, r_outer)?;
            let route = match route {
                Route::Direct => SectorRoute::Direct,
                Route::Conformal => SectorRoute::Conformal,
            };
            let e = estimate_exit_sector(Complex64::new(*start, 0.0), &s, &wos_config(walks)?, walks.samples, route)?;
            // the bound needs |log z| <= log r with r >= 1
            let r = start.ln().abs().exp();
            (e, Some(sector_bound(r, r_outer, *delta)))
        }
    };
    let row = BrownianRow {
        p_hat: estimate.p_hat,
        stderr: estimate.stderr,
        n_samples: estimate.n_samples,
        seed: estimate.seed,
        unabsorbed: estimate.unabsorbed,
        bound,
    };
    render(&BrownianOutput { estimate, bound }, &[row])
}

enum Source {
    Stable(StableProduct),
    Plain(MultiPgf),
}

fn project_cmd(a: &ProjectArgs) -> Result<Rendered, CliError> {
    let source = match (&a.input, a.random_dim) {
        (Some(path), None) => {
            let what = format!("--input {}", path.display());
            let v = input::parse_json(&input::read_file(path)?, &what)?;
            let parsed = if v.get("forms").is_some() {
                serde_json::from_value(v).map(Source::Stable)
            } else {
                serde_json::from_value(v).map(Source::Plain)
            };
            parsed.map_err(|e| CliError::precondition(format!("{what}: {e}")))?
        }
        (None, Some(dim)) => {
            if dim == 0 || a.forms == 0 {
                return Err(CliError::precondition("--random-dim and --forms must be positive"));
            }
            Source::Stable(random_stable_product(dim, a.forms, require_seed(a.seed)?)?)
        }
        _ => return Err(CliError::precondition("give exactly one of --input or --random-dim")),
    };
    let (dim, cov, expanded) = match &source {
        Source::Stable(sp) => (sp.dim(), sp.covariance_stats(), None),
        Source::Plain(f) => (f.dim(), covariance_stats(f), Some(f)),
    };
    let dirs: Vec<DirectionVector> = if a.directions.is_empty() {
        enumerate_directions(dim, 3)
    } else {
        a.directions.iter().map(|v| DirectionVector::new(v.clone())).collect::<Result<_, _>>()?
    };
    let mut out = Vec::with_capacity(dirs.len());
    for v in dirs {
        if v.entries().len() != dim {
            return Err(CliError::precondition(format!("--v {:?} has length {}, expected {dim}", v.entries(), v.entries().len())));
        }
        let (pmf, sector) = match (&source, expanded) {
            (Source::Stable(sp), _) => (sp.project(&v)?.expand().to_pmf(), Some(projection_sector_check(sp, &v, 1e-6)?)),
            (_, Some(f)) => (project(f, &v)?.to_pmf(), None),
            _ => unreachable!(),
        };
        let d = match kolmogorov_distance(&pmf) {
            Ok(d) => Some(d),
            Err(pgf_clt::dist::DistError::Degenerate) => None,
            Err(e) => return Err(e.into()),
        };
        out.push(DirectionOutput {
            variance: cov.quadratic(&v),
            v,
            d,
            sector_pass: sector.as_ref().map(|s| s.pass),
            min_arg: sector.as_ref().map(|s| s.min_arg),
        });
    }
    let rows: Vec<DirectionRow> = out
        .iter()
        .map(|o| DirectionRow {
            v: o.v.entries().iter().map(u32::to_string).collect::<Vec<_>>().join(" "),
            variance: o.variance,
            d: o.d,
            sector_pass: o.sector_pass,
            min_arg: o.min_arg,
        })
        .collect();
    let stable = matches!(source, Source::Stable(_));
    render(&ProjectOutput { dim, stable, covariance: cov, directions: out }, &rows)
}

fn run(cli: &Cli) -> Result<(Rendered, bool), CliError> {
    Ok(match &cli.command {
        Command::Analyze(p) => (analyze(p)?, true),
        Command::Roots { pgf, tol } => (roots(pgf, *tol)?, true),
        Command::Construct(c) => (construct(c)?, true),
        Command::Brownian(b) => (brownian(b)?, true),
        Command::Project(a) => (project_cmd(a)?, true),
        Command::Verify { suite, seed, cases } => {
            let r = verify::run(*suite, require_seed(*seed)?, *cases)?;
            let row = VerifyRow {
                suite: serde_json::to_value(r.suite)?.as_str().unwrap_or_default().to_string(),
                seed: r.seed,
                cases: r.cases,
                failures: r.failures,
                worst: r.worst,
            };
            let ok = r.failures == 0;
            (render(&r, &[row])?, ok)
        }
    })
}

fn configure_workers() -> Result<(), CliError> {
    let Ok(v) = std::env::var(WORKERS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| CliError::precondition(format!("{WORKERS_ENV}={v} is not a positive integer")))?;
    if n == 0 {
        return Err(CliError::precondition(format!("{WORKERS_ENV} must be positive")));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::internal(e.to_string()))
}

fn emit(cli: &Cli, r: &Rendered) -> Result<(), CliError> {
    let bytes: &[u8] = match cli.format {
        Format::Json => r.json.as_bytes(),
        Format::Csv => r.csv.as_deref().ok_or_else(|| CliError::precondition("no CSV form for this output"))?,
    };
    match &cli.out {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_workers().and_then(|_| run(&cli)).and_then(|(r, ok)| emit(&cli, &r).map(|_| ok));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        // an invariant suite found counterexamples
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
