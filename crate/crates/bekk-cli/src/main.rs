//! `bekk` — command-line driver for BEKK-ARCH simulation and tail analysis.
//!
//! Subcommands take a model spec (JSON) and/or a path CSV and emit
//! machine-readable outputs: CSV for bulk series, JSON for reports. Every
//! randomized command records its seed in the output so reruns are
//! bit-reproducible; file outputs are written atomically (temp file +
//! rename). Replicate-level parallelism honours `RAYON_NUM_THREADS`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thiserror::Error;

use bekk_core::covariance::{cov_report, fluctuation_scan, CovarianceError, FluctuationScan};
use bekk_core::extremes::{
    cluster_sizes, default_horizon, extremal_index_blocks, extremal_index_mc, spectral_estimate,
    uniform_angle_grid, ExtremalReport, ExtremesError, MarginalTheta, MeanStderr, VsrvScale,
};
use bekk_core::model::{classify, ClassLabel, ModelError, ModelSpec};
use bekk_core::simulate::{simulate_h_form, simulate_sre, PathSample, SimulateError};
use bekk_core::stationarity::{stationarity_report, StationarityConfig, StationarityError};
use bekk_core::tails::{
    analytic_tail_profile, goldie_constant_mc, hill_plateau, solve_alpha, TailError, TailProfile,
};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "bekk",
    version,
    about = "Simulation, stationarity checks, and extreme-value diagnostics for BEKK-ARCH models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path and write it as CSV with a JSON metadata sidecar.
    Simulate(SimulateArgs),
    /// Run the stationarity diagnostics (Lyapunov exponent, closed-form
    /// gate, moment conditions) and emit a JSON report.
    CheckStationarity(CheckStationarityArgs),
    /// Structurally classify a model spec.
    Classify(ClassifyArgs),
    /// Tail indices: analytic from a spec, or Hill-estimated from a path.
    TailIndex(TailIndexArgs),
    /// Rank-based spectral-measure curves for a bivariate path.
    SpectralMeasure(SpectralMeasureArgs),
    /// Extremal indices per marginal, by the coefficient-product formula
    /// and/or the blocks estimator.
    ExtremalIndex(ExtremalIndexArgs),
    /// Sample covariance, cross-product tail comparison, and optional
    /// fluctuation-rate scan.
    Covariance(CovarianceArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Number of retained steps.
    #[arg(long = "T")]
    t_len: usize,
    /// Warm-up steps discarded before the retained segment.
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    /// RNG seed (drawn from entropy and recorded when omitted).
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path; the metadata sidecar lands at <out>.meta.json.
    #[arg(long)]
    out: PathBuf,
    /// Which representation to simulate.
    #[arg(long, value_enum, default_value_t = Representation::Sre)]
    representation: Representation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Representation {
    /// Random-coefficient recursion.
    Sre,
    /// Conditional-covariance form (Cholesky factor times Gaussian vector).
    HForm,
}

#[derive(Args)]
struct CheckStationarityArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    n_steps: usize,
    #[arg(long, default_value_t = 20)]
    n_reps: usize,
    /// Moment orders to check, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    moment_orders: Vec<u32>,
    /// Monte-Carlo samples for moment orders above 1.
    #[arg(long, default_value_t = 10_000)]
    mc_samples: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TailIndexArgs {
    /// Model spec JSON file (analytic route).
    #[arg(long, conflicts_with = "path", required_unless_present = "path")]
    spec: Option<PathBuf>,
    /// Path CSV (Hill route).
    #[arg(long)]
    path: Option<PathBuf>,
    /// Also estimate the tail-scale constants by Monte Carlo (spec route).
    #[arg(long, default_value_t = false)]
    goldie: bool,
    /// Transitions per replicate for the tail-scale Monte Carlo.
    #[arg(long, default_value_t = 100_000)]
    goldie_t: usize,
    /// Replicates for the tail-scale Monte Carlo.
    #[arg(long, default_value_t = 16)]
    goldie_reps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectralMeasureArgs {
    /// Path CSV (bivariate).
    #[arg(long)]
    path: PathBuf,
    /// Threshold counts, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "100,200,300,400,500")]
    k: Vec<usize>,
    /// Number of grid angles spanning [0, pi/2].
    #[arg(long, default_value_t = 100)]
    grid: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ExtremalIndexArgs {
    /// Model spec (enables the coefficient-product formula; must be
    /// diagonal).
    #[arg(long, required_unless_present = "path")]
    spec: Option<PathBuf>,
    /// Path CSV (enables the blocks estimator).
    #[arg(long)]
    path: Option<PathBuf>,
    /// Per-marginal tail indices; derived from the spec when omitted.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Truncation horizon for the formula Monte Carlo (drift-based default).
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long, default_value_t = 400_000)]
    reps: usize,
    #[arg(long, default_value_t = 0.995)]
    quantile: f64,
    #[arg(long, default_value_t = 200)]
    block_len: usize,
    /// Cluster gap for the cluster-size histogram (spec + path only).
    #[arg(long, default_value_t = 2)]
    cluster_gap: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CovarianceArgs {
    /// Path CSV.
    #[arg(long)]
    path: PathBuf,
    /// Model spec for the tail profile (diagonal or similarity).
    #[arg(long, required_unless_present = "alpha")]
    spec: Option<PathBuf>,
    /// Per-marginal tail indices overriding the spec-derived profile.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Order statistics used by the cross-product Hill estimates.
    #[arg(long, default_value_t = 2000)]
    k: usize,
    /// Acceptance band around the predicted cross-product index.
    #[arg(long, default_value_t = 0.6)]
    band: f64,
    /// Also run the fluctuation-rate scan (needs --spec).
    #[arg(long, default_value_t = false)]
    fluctuation: bool,
    /// Path lengths for the fluctuation scan, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "2000,8000,32000,128000")]
    n_grid: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// CLI failure with an exit code per error class.
#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Spec(#[from] ModelError),
    #[error("{0}")]
    InputData(SimulateError),
    #[error("{0}")]
    Analysis(String),
    #[error("failed to write {path}: {message}")]
    Output { path: String, message: String },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Spec(_) => "spec",
            CliError::InputData(_) => "input-data",
            CliError::Analysis(_) => "analysis",
            CliError::Output { .. } => "output",
            CliError::Usage(_) => "usage",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Spec(_) => 3,
            CliError::InputData(_) => 4,
            CliError::Analysis(_) => 5,
            CliError::Output { .. } => 6,
            CliError::Usage(_) => 2,
        }
    }
}

macro_rules! analysis_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Analysis(e.to_string())
            }
        }
    )*};
}
analysis_from!(StationarityError, TailError, ExtremesError, CovarianceError);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let structured = json!({
                "error": { "kind": err.kind(), "message": err.to_string() }
            });
            eprintln!("{structured}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::CheckStationarity(args) => cmd_check_stationarity(args),
        Command::Classify(args) => cmd_classify(args),
        Command::TailIndex(args) => cmd_tail_index(args),
        Command::SpectralMeasure(args) => cmd_spectral_measure(args),
        Command::ExtremalIndex(args) => cmd_extremal_index(args),
        Command::Covariance(args) => cmd_covariance(args),
    }
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

/// Writes bytes atomically: temp file in the target directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |message: String| CliError::Output {
        path: path.display().to_string(),
        message,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(|e| err(e.to_string()))?;
    tmp.write_all(bytes).map_err(|e| err(e.to_string()))?;
    tmp.persist(path).map_err(|e| err(e.to_string()))?;
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => write_atomic(path, bytes),
        None => {
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::Output {
                    path: "<stdout>".into(),
                    message: e.to_string(),
                })
        }
    }
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    text.push('\n');
    emit(out, text.as_bytes())
}

fn load_path(path: &Path) -> Result<PathSample, CliError> {
    PathSample::read_csv(path).map_err(CliError::InputData)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let spec = ModelSpec::from_path(&args.spec)?;
    let seed = resolve_seed(args.seed);
    let sample = match args.representation {
        Representation::Sre => simulate_sre(&spec, args.t_len, args.burnin, seed),
        Representation::HForm => simulate_h_form(&spec, args.t_len, args.burnin, seed)
            .map_err(|e| CliError::Analysis(e.to_string()))?,
    };
    // Write to temporaries first so the CSV and its sidecar appear together.
    let tmp_dir = tempfile::tempdir_in(
        args.out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new(".")),
    )
    .map_err(|e| CliError::Output {
        path: args.out.display().to_string(),
        message: e.to_string(),
    })?;
    let staged = tmp_dir.path().join("path.csv");
    sample.write_csv(&staged).map_err(|e| CliError::Output {
        path: args.out.display().to_string(),
        message: e.to_string(),
    })?;
    let move_err = |e: std::io::Error| CliError::Output {
        path: args.out.display().to_string(),
        message: e.to_string(),
    };
    std::fs::rename(&staged, &args.out).map_err(move_err)?;
    std::fs::rename(
        bekk_core::simulate::sidecar_path(&staged),
        bekk_core::simulate::sidecar_path(&args.out),
    )
    .map_err(move_err)?;
    if sample.diverged {
        eprintln!(
            "{}",
            json!({
                "warning": "path diverged",
                "divergence_step": sample.divergence_step,
            })
        );
    }
    Ok(())
}

fn cmd_check_stationarity(args: CheckStationarityArgs) -> Result<(), CliError> {
    let spec = ModelSpec::from_path(&args.spec)?;
    let seed = resolve_seed(args.seed);
    let config = StationarityConfig {
        n_steps: args.n_steps,
        n_reps: args.n_reps,
        moment_orders: args.moment_orders.clone(),
        mc_samples: args.mc_samples,
    };
    let report = stationarity_report(&spec, &config, seed)?;
    let value = json!({
        "tool": "bekk",
        "version": VERSION,
        "seed": seed,
        "spec_digest": spec.digest(),
        "report": report,
    });
    emit_json(args.out.as_deref(), &value)
}

fn cmd_classify(args: ClassifyArgs) -> Result<(), CliError> {
    let spec = ModelSpec::from_path(&args.spec)?;
    let class = classify(&spec);
    let value = json!({
        "tool": "bekk",
        "version": VERSION,
        "spec_digest": spec.digest(),
        "class": class,
    });
    emit_json(args.out.as_deref(), &value)
}

fn cmd_tail_index(args: TailIndexArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let value = if let Some(spec_path) = &args.spec {
        let spec = ModelSpec::from_path(spec_path)?;
        let mut profile = analytic_tail_profile(&spec)?;
        if args.goldie {
            let estimates = (0..spec.d())
                .map(|i| {
                    goldie_constant_mc(
                        &spec,
                        i,
                        profile.alpha[i],
                        args.goldie_t,
                        args.goldie_reps,
                        seed.wrapping_add(i as u64),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            profile.c = Some(estimates);
        }
        json!({
            "tool": "bekk",
            "version": VERSION,
            "seed": seed,
            "spec_digest": spec.digest(),
            "route": "analytic",
            "profile": profile,
        })
    } else {
        let path = load_path(args.path.as_ref().expect("clap enforces spec|path"))?;
        let mut alphas = Vec::with_capacity(path.dim());
        let mut sweeps = Vec::with_capacity(path.dim());
        for i in 0..path.dim() {
            let plateau = hill_plateau(&path.marginal(i))?;
            alphas.push(plateau.alpha);
            sweeps.push(plateau);
        }
        let profile = TailProfile {
            alpha: alphas,
            c: None,
            class: None,
        };
        json!({
            "tool": "bekk",
            "version": VERSION,
            "spec_digest": path.spec_digest,
            "route": "hill",
            "profile": profile,
            "hill_sweeps": sweeps,
        })
    };
    emit_json(args.out.as_deref(), &value)
}

fn cmd_spectral_measure(args: SpectralMeasureArgs) -> Result<(), CliError> {
    if args.grid < 2 {
        return Err(CliError::Usage("--grid must be at least 2".into()));
    }
    let path = load_path(&args.path)?;
    let grid = uniform_angle_grid(args.grid);
    let estimate = spectral_estimate(&path, &args.k, &grid)?;
    match args.format {
        OutputFormat::Csv => {
            let mut out = String::from("theta,k,phi\n");
            for &k in &estimate.k_values {
                let curve = &estimate.phi[&k];
                for (theta, phi) in estimate.theta_grid.iter().zip(curve) {
                    // angles in radians, 12 significant digits
                    out.push_str(&format!("{theta:.11e},{k},{phi}\n"));
                }
            }
            emit(args.out.as_deref(), out.as_bytes())
        }
        OutputFormat::Json => {
            let value = json!({
                "tool": "bekk",
                "version": VERSION,
                "spec_digest": path.spec_digest,
                "estimate": estimate,
            });
            emit_json(args.out.as_deref(), &value)
        }
    }
}

fn cmd_extremal_index(args: ExtremalIndexArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let spec = args.spec.as_ref().map(|p| ModelSpec::from_path(p)).transpose()?;
    let path = args.path.as_ref().map(|p| load_path(p)).transpose()?;

    let d = spec
        .as_ref()
        .map(ModelSpec::d)
        .or(path.as_ref().map(PathSample::dim))
        .ok_or_else(|| CliError::Usage("need --spec and/or --path".into()))?;
    if let (Some(s), Some(p)) = (&spec, &path) {
        if s.d() != p.dim() {
            return Err(CliError::Usage(format!(
                "spec dimension {} does not match path dimension {}",
                s.d(),
                p.dim()
            )));
        }
    }

    // tail indices: explicit flag wins, otherwise from the spec
    let alphas: Option<Vec<f64>> = match (&args.alpha, &spec) {
        (Some(a), _) => {
            if a.len() != d {
                return Err(CliError::Usage(format!(
                    "--alpha needs {d} values, got {}",
                    a.len()
                )));
            }
            Some(a.clone())
        }
        (None, Some(s)) if classify(s).has(ClassLabel::Diagonal) => Some(
            (0..d)
                .map(|i| solve_alpha(s.a()[0].get(i, i)))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        _ => None,
    };

    let mut theta_marginal = Vec::new();
    let mut methods = Vec::new();
    for i in 0..d {
        let mc = match (&spec, &alphas) {
            (Some(s), Some(al)) => {
                let a_ii = s.a()[0].get(i, i);
                let horizon = args.horizon.unwrap_or_else(|| default_horizon(a_ii));
                let (estimate, stderr) =
                    extremal_index_mc(s, i, al[i], horizon, args.reps, seed.wrapping_add(i as u64))?;
                Some(MeanStderr { estimate, stderr })
            }
            _ => None,
        };
        let blocks = path
            .as_ref()
            .map(|p| extremal_index_blocks(p, i, args.quantile, args.block_len))
            .transpose()?;
        theta_marginal.push(MarginalTheta {
            marginal: i,
            mc,
            blocks,
        });
    }
    if theta_marginal.iter().any(|t| t.mc.is_some()) {
        methods.push("mc-formula");
    }
    if theta_marginal.iter().any(|t| t.blocks.is_some()) {
        methods.push("blocks");
    }
    if methods.is_empty() {
        return Err(CliError::Usage(
            "nothing to estimate: MC formula needs a diagonal --spec (or --alpha), blocks needs --path"
                .into(),
        ));
    }

    let cluster_size_hist = match (&path, &alphas) {
        (Some(p), Some(al)) => {
            let scale = VsrvScale::with_unit_constants(al.clone());
            Some(cluster_sizes(p, &scale, args.quantile, args.cluster_gap)?)
        }
        _ => None,
    };

    let conjecture_conditional = spec
        .as_ref()
        .map(|s| classify(s).has(ClassLabel::Diagonal))
        .unwrap_or(false);
    let report = ExtremalReport {
        theta_marginal,
        method: methods.join("+"),
        cluster_size_hist,
        conjecture_conditional,
    };
    let value = json!({
        "tool": "bekk",
        "version": VERSION,
        "seed": seed,
        "spec_digest": spec.as_ref().map(ModelSpec::digest),
        "report": report,
    });
    emit_json(args.out.as_deref(), &value)
}

fn cmd_covariance(args: CovarianceArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let path = load_path(&args.path)?;
    let spec = args.spec.as_ref().map(|p| ModelSpec::from_path(p)).transpose()?;

    let profile = match (&args.alpha, &spec) {
        (Some(a), _) => {
            if a.len() != path.dim() {
                return Err(CliError::Usage(format!(
                    "--alpha needs {} values, got {}",
                    path.dim(),
                    a.len()
                )));
            }
            TailProfile {
                alpha: a.clone(),
                c: None,
                class: None,
            }
        }
        (None, Some(s)) => analytic_tail_profile(s)?,
        (None, None) => unreachable!("clap enforces spec|alpha"),
    };

    let fluctuation: Option<FluctuationScan> = if args.fluctuation {
        let spec = spec.as_ref().ok_or_else(|| {
            CliError::Usage("--fluctuation needs --spec to simulate replicates".into())
        })?;
        Some(fluctuation_scan(
            spec,
            &profile,
            &args.n_grid,
            args.reps,
            args.burnin,
            seed,
        )?)
    } else {
        None
    };

    let report = cov_report(&path, &profile, args.k, args.band, fluctuation)?;

    if let (Some(scan), Some(out)) = (&report.fluctuation, &args.out) {
        // regression points as a CSV next to the JSON report
        let mut csv = String::from("n,i,j,iqr\n");
        let d = path.dim();
        for point in &scan.points {
            for i in 0..d {
                for j in i..d {
                    csv.push_str(&format!("{},{i},{j},{}\n", point.n, point.iqr[i * d + j]));
                }
            }
        }
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".fluctuation.csv");
        write_atomic(&out.with_file_name(name), csv.as_bytes())?;
    }

    let value = json!({
        "tool": "bekk",
        "version": VERSION,
        "seed": seed,
        "spec_digest": spec.as_ref().map(ModelSpec::digest).unwrap_or_else(|| path.spec_digest.clone()),
        "report": report,
    });
    emit_json(args.out.as_deref(), &value)
}
