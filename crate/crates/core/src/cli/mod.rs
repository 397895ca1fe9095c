//! Command-line front end.
//!
//! Every run writes `manifest.json` next to its outputs. The manifest holds
//! the resolved configuration, the library version, the RNG algorithm and
//! the model source text with its git blob hash. `eprlab replay` re-executes
//! a run from its manifest alone.
//!
//! Exit codes: 0 success, 1 an embedded check failed, 2 configuration
//! error, 3 invalid model, 4 numerical failure.

mod commands;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};

use crate::error::Error;
use crate::model::{InitialLaw, ModelFile, OUModel};
use crate::simulate::RNG_ALGORITHM;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "eprlab", version, about = "Entropy production of linear diffusions: closed forms and Monte Carlo fluctuation harnesses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived stationary quantities and functional constants of a model.
    Info(RunArgs),
    /// Simulate independent paths and record the pathwise functional.
    Simulate(RunArgs),
    /// Gaussian-fluctuation ensemble with a Kolmogorov–Smirnov test.
    Clt(RunArgs),
    /// Moderate-deviation tail profile.
    Mdp(RunArgs),
    /// Iterated-logarithm statistic along one long path.
    Lil(RunArgs),
    /// Semigroup decay and exponential-integrability checks.
    Check(RunArgs),
    /// Re-execute a run from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Model file `{"B": [[..]], "Sigma": [[..]]}`.
    #[arg(long)]
    pub model: PathBuf,
    /// Output directory (optional for `info`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub lambda_exponent: Option<f64>,
    /// Geometric checkpoint ratio for `lil`.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Comma-separated thresholds for `mdp`.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Interpret `--thresholds` as multiples of the ensemble σ̂.
    #[arg(long)]
    pub sigma_units: bool,
    /// `stationary` or `shift:m1,m2,...`
    #[arg(long)]
    pub initial_law: Option<String>,
    /// Time grid: σ̂² stabilization for `clt`, decay times for `check`.
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// Write a decimated trace of path 0 every N steps (`simulate`).
    #[arg(long)]
    pub trace_every: Option<u64>,
    /// Reference σ̂² for `lil`; estimated by a pilot ensemble when absent.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Pilot ensemble size for `lil`.
    #[arg(long)]
    pub pilot_paths: Option<usize>,
    /// Exponent η for the integrability check (`check`).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Test direction `v1,v2,...` for the decay check; repeatable.
    #[arg(long = "direction")]
    pub directions: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Info,
    Simulate,
    Clt,
    Mdp,
    Lil,
    Check,
}

/// Fully resolved run configuration; recorded verbatim in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub model_path: String,
    pub seed: u64,
    pub n_paths: usize,
    pub t: f64,
    pub dt: f64,
    pub initial_law: InitialLaw,
    pub lambda_exponent: f64,
    pub gamma_checkpoint: f64,
    pub thresholds: Vec<f64>,
    pub sigma_units: bool,
    pub t_grid: Vec<f64>,
    pub trace_every: Option<u64>,
    pub sigma2: Option<f64>,
    pub pilot_paths: usize,
    pub eta: Option<f64>,
    pub directions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub rng_algorithm: String,
    pub config: RunConfig,
    /// Git blob SHA-1 of `model_source`.
    pub model_sha1: String,
    pub model_source: String,
    pub model: ModelFile,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckOutcome>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Model(Error),
    #[error("numerical failure: {0}")]
    Numeric(Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Model(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    /// Classifies an error raised while running an experiment.
    pub(crate) fn from_run(e: Error) -> Self {
        match e {
            Error::InvalidParameter(m) => CliError::Config(m),
            e @ Error::DimensionMismatch { .. } => CliError::Config(e.to_string()),
            e => CliError::Numeric(e),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Hash used by git for a blob with these contents.
pub fn git_blob_sha1(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Result of one executed command.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Human-readable summary printed to stdout.
    pub summary: String,
    pub checks: Vec<CheckOutcome>,
    pub out_dir: Option<PathBuf>,
}

impl Outcome {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }
}

fn parse_model(source: &str) -> Result<(ModelFile, OUModel), CliError> {
    let file = ModelFile::from_json(source).map_err(CliError::Model)?;
    let model = file.build().map_err(CliError::Model)?;
    Ok((file, model))
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{name} must be positive and finite, got {v}")))
    }
}

/// Applies per-command defaults to the raw flags.
fn resolve(kind: CommandKind, args: &RunArgs, model: &OUModel) -> Result<RunConfig, CliError> {
    let relax = 1.0 / model.functional_constants().decay_rate;
    let t = match args.t {
        Some(t) => positive("t", t)?,
        None => match kind {
            CommandKind::Clt => 50f64.max(10.0 * relax),
            CommandKind::Mdp => 100f64.max(10.0 * relax),
            CommandKind::Lil => 1e4,
            _ => 10.0,
        },
    };
    let dt = match args.dt {
        Some(dt) => positive("dt", dt)?,
        None => match kind {
            CommandKind::Check => 1e-2 * relax.min(1.0),
            _ => model.default_dt(),
        },
    };
    let n_paths = args.paths.unwrap_or(match kind {
        CommandKind::Simulate => 1,
        CommandKind::Clt => 2000,
        CommandKind::Mdp => 10_000,
        CommandKind::Check => 5000,
        _ => 1,
    });
    if n_paths == 0 {
        return Err(CliError::Config("--paths must be positive".into()));
    }
    let initial_law = match &args.initial_law {
        Some(s) => InitialLaw::parse(s).map_err(CliError::from_run)?,
        None => InitialLaw::Stationary,
    };
    initial_law.validate(model.dim()).map_err(CliError::from_run)?;
    let (thresholds, sigma_units) = match &args.thresholds {
        Some(th) => (th.clone(), args.sigma_units),
        None => (vec![0.5, 1.0], true),
    };
    let t_grid = match &args.t_grid {
        Some(g) => g.clone(),
        None if kind == CommandKind::Check => vec![0.1, 1.0, 5.0],
        None => Vec::new(),
    };
    let mut directions = Vec::new();
    for d in &args.directions {
        let v = d
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("bad --direction `{d}`: {e}")))?;
        directions.push(v);
    }
    if directions.is_empty() && kind == CommandKind::Check {
        directions = (0..model.dim())
            .map(|i| (0..model.dim()).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
    }
    if let Some(s2) = args.sigma2 {
        positive("sigma2", s2)?;
    }
    Ok(RunConfig {
        command: kind,
        model_path: args.model.display().to_string(),
        seed: args.seed.unwrap_or(1),
        n_paths,
        t,
        dt,
        initial_law,
        lambda_exponent: args.lambda_exponent.unwrap_or(0.25),
        gamma_checkpoint: args.gamma.unwrap_or(1.05),
        thresholds,
        sigma_units,
        t_grid,
        trace_every: args.trace_every,
        sigma2: args.sigma2,
        pilot_paths: args.pilot_paths.unwrap_or(2000),
        eta: args.eta,
        directions,
    })
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// Executes a configuration against the model source and writes all
/// outputs plus the manifest into `out`.
pub fn execute(
    config: &RunConfig,
    model_source: &str,
    out: Option<&Path>,
) -> Result<Outcome, CliError> {
    let (file, model) = parse_model(model_source)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let result = commands::dispatch(config, &model, out)?;
    if let Some(dir) = out {
        let manifest = Manifest {
            tool: "eprlab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            rng_algorithm: RNG_ALGORITHM.into(),
            config: config.clone(),
            model_sha1: git_blob_sha1(model_source.as_bytes()),
            model_source: model_source.to_string(),
            model: file,
            outputs: result.outputs.clone(),
            checks: result.checks.clone(),
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(Outcome {
        summary: result.summary,
        checks: result.checks,
        out_dir: out.map(Path::to_path_buf),
    })
}

/// Parses a manifest and re-executes it into `out`.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<Outcome, CliError> {
    let text = read_to_string(manifest_path)?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("malformed manifest: {e}")))?;
    let hash = git_blob_sha1(manifest.model_source.as_bytes());
    if hash != manifest.model_sha1 {
        return Err(CliError::Config(format!(
            "model source hash {hash} does not match manifest {}",
            manifest.model_sha1
        )));
    }
    execute(&manifest.config, &manifest.model_source, Some(out))
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    let (kind, args) = match cli.command {
        Command::Replay(r) => return replay(&r.manifest, &r.out),
        Command::Info(a) => (CommandKind::Info, a),
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Clt(a) => (CommandKind::Clt, a),
        Command::Mdp(a) => (CommandKind::Mdp, a),
        Command::Lil(a) => (CommandKind::Lil, a),
        Command::Check(a) => (CommandKind::Check, a),
    };
    let source = read_to_string(&args.model)?;
    let (_, model) = parse_model(&source)?;
    let config = resolve(kind, &args, &model)?;
    if kind != CommandKind::Info && args.out.is_none() {
        return Err(CliError::Config("--out is required".into()));
    }
    execute(&config, &source, args.out.as_deref())
}

/// Entry point shared by the binary and the tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for c in &outcome.checks {
                eprintln!(
                    "check {}: {} ({})",
                    c.name,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail
                );
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
