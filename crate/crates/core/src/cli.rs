//! Command-line front end: argument parsing, validated run configurations,
//! data ingestion and the JSON/CSV outputs of every subcommand.

use crate::error::{Error, Result};
use crate::evaluation::{
    refit_density, refit_density_normalized, run_study, MonteCarloStudy, ReplicateRecord, SizeSummary, StudyTarget,
};
use crate::mellin::{
    estimate_density_known_mu, estimate_density_plugin, invert, uniform_grid, BranchPolicy, CharExponent, CharFunction,
    DensityEstimate, EstimatorConfig, EstimatorTag, MellinEstimate,
};
use crate::models::{GigParams, MixingModel, MixtureModel, Provenance, Sample};
use crate::mu_estimator::{estimate_mu, MuEstimate, WeightFunction, WeightKind, DEFAULT_BIG_M, DEFAULT_TOL};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const ARTIFACT: &str = "vmmix";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

const DEFAULT_N: usize = 1000;
const REFIT_POINTS: usize = 201;

#[derive(Debug, Parser)]
#[command(name = "vmmix", version, about = "Drift and mixing-density estimation for normal variance-mean mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a sample from a mixture model.
    Simulate(SimulateArgs),
    /// Estimate the drift μ.
    EstimateMu(EstimateMuArgs),
    /// Estimate the mixing density with μ supplied by --mu.
    EstimateDensity(EstimateDensityArgs),
    /// Estimate μ, then the mixing density, then refit the observable density.
    Fit(FitArgs),
    /// Monte Carlo study over several sample sizes.
    Study(StudyArgs),
    /// Run the estimator on an exact characteristic function and report the grid error.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gig,
    Gamma,
    Beta,
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TuningMode {
    Paper,
    Theory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightArg {
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BranchArg {
    Display,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Mu,
    DensityKnownMu,
    DensityPlugin,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Mixing law [default: gig, or gamma for oracle-check]
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long = "psi-gig", default_value_t = 1.0)]
    pub psi_gig: f64,
    /// Gamma shape.
    #[arg(long, default_value_t = 2.0)]
    pub shape: f64,
    /// Gamma rate.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    #[arg(long = "beta-p", default_value_t = 2.0)]
    pub beta_p: f64,
    #[arg(long = "beta-q", default_value_t = 2.0)]
    pub beta_q: f64,
    /// Location of the point-mass mixing law.
    #[arg(long, default_value_t = 1.0)]
    pub atom: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub mu: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// One value per line, or a single-column CSV with optional header.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Take logarithms of the input values.
    #[arg(long)]
    pub log: bool,
    /// Sample size when simulating instead of reading --input.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Clone, Args)]
pub struct MuArgs {
    #[arg(long, value_enum, default_value_t = WeightArg::Sine)]
    pub weight: WeightArg,
    #[arg(long = "big-m", default_value_t = DEFAULT_BIG_M)]
    pub big_m: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    #[arg(long, value_enum, default_value_t = TuningMode::Paper)]
    pub tuning: TuningMode,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "u-max")]
    pub u_max: Option<f64>,
    #[arg(long = "v-max")]
    pub v_max: Option<f64>,
    /// V = κ ln n under theory tuning; required there.
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long, value_enum, default_value_t = BranchArg::Display)]
    pub branch: BranchArg,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long = "grid-min")]
    pub grid_min: Option<f64>,
    #[arg(long = "grid-max")]
    pub grid_max: Option<f64>,
    #[arg(long = "grid-step")]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = DEFAULT_N)]
    pub n: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateMuArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub mu: MuArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateDensityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub mu: MuArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub mu: MuArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [100, 300, 500, 1000])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub replicates: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [TargetArg::Mu])]
    pub target: Vec<TargetArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "u-max")]
    pub u_max: Option<f64>,
    #[arg(long = "v-max")]
    pub v_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = BranchArg::Display)]
    pub branch: BranchArg,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Where observations come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    File { path: PathBuf, log: bool },
    Simulated { model: MixtureModel, n: usize, seed: u64 },
}

impl DataSource {
    pub fn load(&self) -> Result<Sample> {
        match self {
            DataSource::File { path, log } => ingest_observations(path, *log),
            DataSource::Simulated { model, n, seed } => Sample::simulate(model, *n, *seed, 0),
        }
    }
}

/// Tuning of the Mellin estimator before the sample size is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    /// `None` for paper tuning, `Some(κ)` for theory tuning.
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub u_max: Option<f64>,
    pub v_max: Option<f64>,
    pub branch: BranchPolicy,
}

impl TuningSpec {
    pub fn resolve(&self, n: usize) -> Result<EstimatorConfig> {
        let gamma = self.gamma.unwrap_or(crate::mellin::PAPER_GAMMA);
        let mut cfg = match self.kappa {
            None => EstimatorConfig::paper(),
            Some(kappa) => EstimatorConfig::theory(n, gamma, kappa)?,
        };
        cfg.gamma = gamma;
        if let Some(u) = self.u_max {
            cfg.u_max = u;
        }
        if let Some(v) = self.v_max {
            cfg.v_max = v;
        }
        cfg.branch = self.branch;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.min > 0.0) {
            return Err(Error::InvalidParameter(format!("grid minimum must be > 0, got {}", self.min)));
        }
        uniform_grid(self.min, self.max, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSearch {
    pub weight: WeightKind,
    pub big_m: f64,
    pub tol: f64,
}

impl MuSearch {
    fn weight(&self) -> Result<WeightFunction> {
        match self.weight {
            WeightKind::Sine => Ok(WeightFunction::sine()),
            WeightKind::Custom { ref name } => Err(Error::Unsupported(format!("weight '{name}' from the command line"))),
        }
    }
}

/// A fully validated subcommand payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CommandConfig {
    Simulate { model: MixtureModel, n: usize, seed: u64 },
    EstimateMu { data: DataSource, search: MuSearch },
    EstimateDensity { data: DataSource, mu: f64, tuning: TuningSpec, grid: GridSpec },
    Fit { data: DataSource, search: MuSearch, tuning: TuningSpec, grid: GridSpec },
    Study { study: MonteCarloStudy },
    OracleCheck { model: MixtureModel, estimator: EstimatorConfig, grid: GridSpec },
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: CommandConfig,
    /// The seed as given on the command line; `None` means one was drawn.
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.command {
            CommandConfig::Simulate { model, n, .. } => {
                model.validate()?;
                nonzero(*n)
            }
            CommandConfig::EstimateMu { data, search } => {
                validate_data(data)?;
                validate_search(search)
            }
            CommandConfig::EstimateDensity { data, mu, tuning, grid } => {
                validate_data(data)?;
                if !mu.is_finite() {
                    return Err(Error::InvalidParameter(format!("mu must be finite, got {mu}")));
                }
                validate_tuning(tuning, data)?;
                grid.points().map(|_| ())
            }
            CommandConfig::Fit { data, search, tuning, grid } => {
                validate_data(data)?;
                validate_search(search)?;
                validate_tuning(tuning, data)?;
                grid.points().map(|_| ())
            }
            CommandConfig::Study { study } => study.validate(),
            CommandConfig::OracleCheck { model, estimator, grid } => {
                model.validate()?;
                estimator.validate()?;
                if matches!(model.mixing, MixingModel::PointMass { .. }) {
                    return Err(Error::Unsupported("oracle check for a point-mass mixing law".into()));
                }
                grid.points().map(|_| ())
            }
        }
    }
}

fn nonzero(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidParameter("n must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn validate_data(data: &DataSource) -> Result<()> {
    match data {
        DataSource::File { .. } => Ok(()),
        DataSource::Simulated { model, n, .. } => {
            model.validate()?;
            nonzero(*n)
        }
    }
}

fn validate_search(s: &MuSearch) -> Result<()> {
    if !(s.big_m > 0.0 && s.big_m.is_finite()) {
        return Err(Error::InvalidParameter(format!("--big-m must be finite and > 0, got {}", s.big_m)));
    }
    if !(s.tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {}", s.tol)));
    }
    s.weight().map(|_| ())
}

fn validate_tuning(t: &TuningSpec, data: &DataSource) -> Result<()> {
    let n = match data {
        DataSource::Simulated { n, .. } => *n,
        DataSource::File { .. } => 2,
    };
    t.resolve(n.max(2)).map(|_| ())
}

fn model_from(args: &ModelArgs, default: ModelKind) -> Result<MixtureModel> {
    let mixing = match args.model.unwrap_or(default) {
        ModelKind::Gig => MixingModel::Gig(GigParams::new(args.lambda, args.delta, args.psi_gig)?),
        ModelKind::Gamma => MixingModel::Gamma { shape: args.shape, rate: args.rate },
        ModelKind::Beta => MixingModel::Beta { p: args.beta_p, q: args.beta_q },
        ModelKind::PointMass => MixingModel::PointMass { atom: args.atom },
    };
    MixtureModel::new(args.mu, mixing)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn data_from(args: &DataArgs, seed: u64) -> Result<DataSource> {
    match &args.input {
        Some(path) => {
            if args.n.is_some() {
                return Err(Error::InvalidParameter("--n cannot be combined with --input".into()));
            }
            Ok(DataSource::File { path: path.clone(), log: args.log })
        }
        None => {
            if args.log {
                return Err(Error::InvalidParameter("--log requires --input".into()));
            }
            Ok(DataSource::Simulated {
                model: model_from(&args.model, ModelKind::Gig)?,
                n: args.n.unwrap_or(DEFAULT_N),
                seed,
            })
        }
    }
}

fn search_from(args: &MuArgs) -> MuSearch {
    let weight = match args.weight {
        WeightArg::Sine => WeightKind::Sine,
    };
    MuSearch { weight, big_m: args.big_m, tol: DEFAULT_TOL }
}

fn branch_from(b: BranchArg) -> BranchPolicy {
    match b {
        BranchArg::Display => BranchPolicy::Display,
        BranchArg::Damped => BranchPolicy::Damped,
    }
}

fn tuning_from(args: &TuningArgs) -> Result<TuningSpec> {
    let kappa = match args.tuning {
        TuningMode::Paper => {
            if args.kappa.is_some() {
                return Err(Error::InvalidParameter("--kappa only applies to --tuning theory".into()));
            }
            None
        }
        TuningMode::Theory => Some(
            args.kappa.ok_or_else(|| Error::InvalidParameter("--tuning theory requires --kappa".into()))?,
        ),
    };
    Ok(TuningSpec { kappa, gamma: args.gamma, u_max: args.u_max, v_max: args.v_max, branch: branch_from(args.branch) })
}

fn grid_from(args: &GridArgs, default: (f64, f64, f64)) -> GridSpec {
    GridSpec {
        min: args.grid_min.unwrap_or(default.0),
        max: args.grid_max.unwrap_or(default.1),
        step: args.grid_step.unwrap_or(default.2),
    }
}

/// Default ĝ grid for fits and density estimates.
pub const FIT_GRID: (f64, f64, f64) = (0.1, 8.0, 0.1);
/// Default grid of the noiseless oracle run.
pub const ORACLE_GRID: (f64, f64, f64) = (0.5, 4.0, 0.05);

impl Cli {
    /// Validates the parsed arguments into a [`RunConfig`].
    pub fn into_config(self) -> Result<RunConfig> {
        let cfg = match self.command {
            Command::Simulate(a) => {
                let model = model_from(&a.model, ModelKind::Gig)?;
                RunConfig {
                    command: CommandConfig::Simulate { model, n: a.n, seed: resolve_seed(a.seed) },
                    seed: a.seed,
                    output: a.output,
                }
            }
            Command::EstimateMu(a) => RunConfig {
                command: CommandConfig::EstimateMu {
                    data: data_from(&a.data, resolve_seed(a.data.seed))?,
                    search: search_from(&a.mu),
                },
                seed: a.data.seed,
                output: a.output,
            },
            Command::EstimateDensity(a) => RunConfig {
                command: CommandConfig::EstimateDensity {
                    data: data_from(&a.data, resolve_seed(a.data.seed))?,
                    mu: a.data.model.mu,
                    tuning: tuning_from(&a.tuning)?,
                    grid: grid_from(&a.grid, FIT_GRID),
                },
                seed: a.data.seed,
                output: a.output,
            },
            Command::Fit(a) => RunConfig {
                command: CommandConfig::Fit {
                    data: data_from(&a.data, resolve_seed(a.data.seed))?,
                    search: search_from(&a.mu),
                    tuning: tuning_from(&a.tuning)?,
                    grid: grid_from(&a.grid, FIT_GRID),
                },
                seed: a.data.seed,
                output: a.output,
            },
            Command::Study(a) => {
                let tuning = tuning_from(&a.tuning)?;
                let config = tuning.resolve(*a.sizes.first().unwrap_or(&DEFAULT_N))?;
                let targets = a
                    .target
                    .iter()
                    .map(|t| match t {
                        TargetArg::Mu => StudyTarget::Mu,
                        TargetArg::DensityKnownMu => StudyTarget::DensityKnownMu,
                        TargetArg::DensityPlugin => StudyTarget::DensityPlugin,
                    })
                    .collect::<Vec<_>>();
                let wants_density = targets.iter().any(|t| *t != StudyTarget::Mu);
                let grid = if wants_density { grid_from(&a.grid, (0.1, 5.0, 0.1)).points()? } else { Vec::new() };
                let study = MonteCarloStudy {
                    model: model_from(&a.model, ModelKind::Gig)?,
                    sample_sizes: a.sizes.clone(),
                    replicates: a.replicates,
                    base_seed: resolve_seed(a.seed),
                    config,
                    targets,
                    grid,
                    big_m: a.mu.big_m,
                    theory_kappa: tuning.kappa,
                };
                RunConfig { command: CommandConfig::Study { study }, seed: a.seed, output: a.output }
            }
            Command::OracleCheck(a) => {
                let mut estimator = EstimatorConfig::new(
                    a.gamma.unwrap_or(0.3),
                    a.u_max.unwrap_or(50.0),
                    a.v_max.unwrap_or(30.0),
                )?;
                estimator.branch = branch_from(a.branch);
                RunConfig {
                    command: CommandConfig::OracleCheck {
                        model: model_from(&a.model, ModelKind::Gamma)?,
                        estimator,
                        grid: grid_from(&a.grid, ORACLE_GRID),
                    },
                    seed: None,
                    output: a.output,
                }
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads one value per line (or a single-column CSV with an optional
/// header), optionally log-transforming each value.
pub fn ingest_observations(path: &Path, log: bool) -> Result<Sample> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut first = true;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let field = raw.trim().trim_matches('"').trim();
        if field.is_empty() {
            continue;
        }
        let header_allowed = std::mem::take(&mut first);
        if field.contains(',') {
            return Err(Error::Parse { line, message: format!("expected a single column, got '{raw}'") });
        }
        let value: f64 = match field.parse() {
            Ok(v) => v,
            Err(_) if header_allowed => continue,
            Err(_) => return Err(Error::Parse { line, message: format!("not a number: '{field}'") }),
        };
        if !value.is_finite() {
            return Err(Error::Parse { line, message: format!("value is not finite: '{field}'") });
        }
        if log {
            if value <= 0.0 {
                return Err(Error::Parse { line, message: format!("cannot take the logarithm of {value}") });
            }
            values.push(value.ln());
        } else {
            values.push(value);
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    Sample::new(values, Provenance::File { path: path.display().to_string(), log_transformed: log })
}

/// Payload of a successful run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Outputs {
    Simulate {
        n: usize,
        seed: u64,
        mean: f64,
        variance: f64,
        /// Inline values when no output file was requested.
        values: Option<Vec<f64>>,
        sample_csv: Option<PathBuf>,
    },
    EstimateMu {
        n: usize,
        estimate: MuEstimate,
    },
    EstimateDensity {
        n: usize,
        density: DensityEstimate,
        density_csv: Option<PathBuf>,
    },
    Fit {
        n: usize,
        mu: MuEstimate,
        density: DensityEstimate,
        refit_x: Vec<f64>,
        refit: Vec<f64>,
        refit_normalized: Vec<f64>,
        density_csv: Option<PathBuf>,
        refit_csv: Option<PathBuf>,
    },
    Study {
        summaries: Vec<SizeSummary>,
        mu_rate: Option<f64>,
        /// Per-replicate rows when no output file was requested.
        records: Option<Vec<ReplicateRecord>>,
        study_csv: Option<PathBuf>,
    },
    OracleCheck {
        max_error: f64,
        mellin_g_at_gamma: Complex64,
        exact_mellin_at_gamma: Option<Complex64>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diagnostics {
    pub max_imag_residual: Option<f64>,
    pub failures: Option<usize>,
    pub failure_rate: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultEnvelope {
    pub artifact: String,
    pub version: String,
    pub config: RunConfig,
    /// Wall-clock time; present only for unseeded runs.
    pub timing_ms: Option<f64>,
    pub outputs: Outputs,
    pub diagnostics: Diagnostics,
}

impl ResultEnvelope {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `out.json` → `out.<tag>.csv` in the same directory.
pub fn sibling_path(output: &Path, tag: &str) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "output".into());
    output.with_file_name(format!("{stem}.{tag}.csv"))
}

fn write_csv<const K: usize>(path: &Path, header: [&str; K], rows: impl Iterator<Item = [String; K]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Runs a validated configuration, writing CSV side files next to the
/// configured output path.
pub fn execute(cfg: &RunConfig) -> Result<ResultEnvelope> {
    cfg.validate()?;
    let clock = cfg.seed.is_none().then(Instant::now);
    let out = cfg.output.as_deref();
    let mut diagnostics = Diagnostics::default();
    let outputs = match &cfg.command {
        CommandConfig::Simulate { model, n, seed } => cmd_simulate(model, *n, *seed, out)?,
        CommandConfig::EstimateMu { data, search } => cmd_estimate_mu(data, search)?,
        CommandConfig::EstimateDensity { data, mu, tuning, grid } => {
            cmd_estimate_density(data, *mu, tuning, grid, out, &mut diagnostics)?
        }
        CommandConfig::Fit { data, search, tuning, grid } => cmd_fit(data, search, tuning, grid, out, &mut diagnostics)?,
        CommandConfig::Study { study } => cmd_study(study, out, &mut diagnostics)?,
        CommandConfig::OracleCheck { model, estimator, grid } => cmd_oracle_check(model, estimator, grid, &mut diagnostics)?,
    };
    Ok(ResultEnvelope {
        artifact: ARTIFACT.into(),
        version: VERSION.into(),
        config: cfg.clone(),
        timing_ms: clock.map(|t| t.elapsed().as_secs_f64() * 1e3),
        outputs,
        diagnostics,
    })
}

/// Writes the envelope to the configured output path, or to stdout.
pub fn emit(envelope: &ResultEnvelope) -> Result<()> {
    let json = envelope.to_json()?;
    match &envelope.config.output {
        Some(path) => fs::write(path, json + "\n")?,
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{json}")?;
        }
    }
    Ok(())
}

pub fn cmd_simulate(model: &MixtureModel, n: usize, seed: u64, out: Option<&Path>) -> Result<Outputs> {
    let sample = Sample::simulate(model, n, seed, 0)?;
    let mean = sample.mean();
    let variance = sample.values().iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n.max(2).saturating_sub(1) as f64;
    let (values, sample_csv) = match out {
        Some(path) => {
            let csv_path = sibling_path(path, "sample");
            write_csv(&csv_path, ["x"], sample.values().iter().map(|x| [x.to_string()]))?;
            (None, Some(csv_path))
        }
        None => (Some(sample.values().to_vec()), None),
    };
    Ok(Outputs::Simulate { n, seed, mean, variance, values, sample_csv })
}

pub fn cmd_estimate_mu(data: &DataSource, search: &MuSearch) -> Result<Outputs> {
    let sample = data.load()?;
    let estimate = estimate_mu(&sample, &search.weight()?, search.big_m, search.tol)?;
    Ok(Outputs::EstimateMu { n: sample.len(), estimate })
}

fn write_density(path: &Path, d: &DensityEstimate) -> Result<PathBuf> {
    let csv_path = sibling_path(path, "density");
    let clamped = d.clamped();
    write_csv(
        &csv_path,
        ["x", "g_hat", "g_hat_clamped"],
        d.grid.iter().zip(&d.values).zip(&clamped).map(|((x, v), c)| [x.to_string(), v.to_string(), c.to_string()]),
    )?;
    Ok(csv_path)
}

fn note_imag(d: &DensityEstimate, diagnostics: &mut Diagnostics) {
    diagnostics.max_imag_residual = Some(d.max_imag_residual);
    if d.max_imag_residual > 1e-6 * (1.0 + d.max_abs()) {
        diagnostics.warnings.push(format!("imaginary residual {:.3e} exceeds the realness tolerance", d.max_imag_residual));
    }
}

pub fn cmd_estimate_density(
    data: &DataSource,
    mu: f64,
    tuning: &TuningSpec,
    grid: &GridSpec,
    out: Option<&Path>,
    diagnostics: &mut Diagnostics,
) -> Result<Outputs> {
    let sample = data.load()?;
    let cfg = tuning.resolve(sample.len())?;
    let n = sample.len();
    let density = estimate_density_known_mu(&CharFunction::Empirical(sample), mu, &grid.points()?, &cfg)?;
    note_imag(&density, diagnostics);
    let density_csv = out.map(|p| write_density(p, &density)).transpose()?;
    Ok(Outputs::EstimateDensity { n, density, density_csv })
}

pub fn cmd_fit(
    data: &DataSource,
    search: &MuSearch,
    tuning: &TuningSpec,
    grid: &GridSpec,
    out: Option<&Path>,
    diagnostics: &mut Diagnostics,
) -> Result<Outputs> {
    let sample = data.load()?;
    let n = sample.len();
    let mu = estimate_mu(&sample, &search.weight()?, search.big_m, search.tol)?;
    if !mu.bracket_found {
        diagnostics.warnings.push(format!("mu search did not bracket a root; using the boundary value {}", mu.value));
    }
    let cfg = tuning.resolve(n)?;
    let density = estimate_density_plugin(&sample, mu.value, &grid.points()?, &cfg)?;
    note_imag(&density, diagnostics);

    let lo = sample.values().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sample.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let refit_x: Vec<f64> = if hi > lo {
        (0..REFIT_POINTS).map(|k| lo + (hi - lo) * k as f64 / (REFIT_POINTS - 1) as f64).collect()
    } else {
        vec![lo]
    };
    let refit = refit_x.iter().map(|&x| refit_density(x, mu.value, &density)).collect::<Result<Vec<_>>>()?;
    let refit_normalized = match refit_x.iter().map(|&x| refit_density_normalized(x, mu.value, &density)).collect() {
        Ok(v) => v,
        Err(e) => {
            diagnostics.warnings.push(format!("normalized refit unavailable: {e}"));
            Vec::new()
        }
    };
    let (density_csv, refit_csv) = match out {
        Some(path) => {
            let d = write_density(path, &density)?;
            let r = sibling_path(path, "refit");
            let norm = |k: usize| refit_normalized.get(k).map(|v| v.to_string()).unwrap_or_default();
            write_csv(
                &r,
                ["x", "p_hat", "p_hat_normalized"],
                refit_x.iter().zip(&refit).enumerate().map(|(k, (x, p))| [x.to_string(), p.to_string(), norm(k)]),
            )?;
            (Some(d), Some(r))
        }
        None => (None, None),
    };
    Ok(Outputs::Fit { n, mu, density, refit_x, refit, refit_normalized, density_csv, refit_csv })
}

pub fn cmd_study(study: &MonteCarloStudy, out: Option<&Path>, diagnostics: &mut Diagnostics) -> Result<Outputs> {
    let result = run_study(study)?;
    let failures = result.summaries.iter().map(|s| s.failures).sum::<usize>();
    diagnostics.failures = Some(failures);
    diagnostics.failure_rate = Some(failures as f64 / result.records.len() as f64);
    let mu_rate = if study.targets.contains(&StudyTarget::Mu) && study.sample_sizes.len() >= 3 {
        result.mu_rate().ok()
    } else {
        None
    };
    let (records, study_csv) = match out {
        Some(path) => {
            let csv_path = sibling_path(path, "study");
            write_csv(
                &csv_path,
                ["n", "replicate", "stream", "status", "mu_hat", "r_known", "r_plugin", "message"],
                result.records.iter().map(|r| {
                    [
                        r.n.to_string(),
                        r.replicate.to_string(),
                        r.stream.to_string(),
                        serde_json::to_value(r.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
                        fmt_opt(r.mu_hat),
                        fmt_opt(r.r_known),
                        fmt_opt(r.r_plugin),
                        r.message.clone().unwrap_or_default(),
                    ]
                }),
            )?;
            (None, Some(csv_path))
        }
        None => (Some(result.records.clone()), None),
    };
    Ok(Outputs::Study { summaries: result.summaries, mu_rate, records, study_csv })
}

pub fn cmd_oracle_check(
    model: &MixtureModel,
    estimator: &EstimatorConfig,
    grid: &GridSpec,
    diagnostics: &mut Diagnostics,
) -> Result<Outputs> {
    let points = grid.points()?;
    let est = MellinEstimate::new(&CharFunction::Exact(*model), CharExponent::new(model.mu), estimator)?;
    let density = invert(&est, &points, EstimatorTag::OracleCf)?;
    note_imag(&density, diagnostics);
    let mut max_error: f64 = 0.0;
    for (&x, &v) in points.iter().zip(&density.values) {
        max_error = max_error.max((v - model.mixing.density(x)?).abs());
    }
    let z = Complex64::new(estimator.gamma, 0.0);
    let exact = model.mixing.mellin(z).ok();
    Ok(Outputs::OracleCheck { max_error, mellin_g_at_gamma: est.mellin_g(z)?, exact_mellin_at_gamma: exact })
}

/// Machine-readable error object written to stderr on failure.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}
