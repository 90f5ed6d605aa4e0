//! Experiment runner for `gravchan`.
//!
//! A run reads a JSON configuration (see [`config`]), validates all of it
//! before touching the filesystem, dispatches the experiment and writes a
//! [`bundle::ResultBundle`] into the output directory. The directory is
//! taken from `--out`, then `GRAVCHAN_OUT_DIR`, then `output.directory`,
//! then `gravchan-out`.
//!
//! | exit code | meaning |
//! |-----------|---------|
//! | 0 | success |
//! | 1 | I/O error |
//! | 2 | invalid configuration, nothing written |
//! | 3 | numerical failure (invariant breach, leakage, step too large) |
//! | 4 | `--check` assertions failed (outputs are still written) |

use std::path::{Path, PathBuf};

use serde_json::Value;

pub mod bundle;
pub mod config;
pub mod experiments;
pub mod sweep;

use bundle::{write_bundle, Provenance, ResultBundle};
use config::ExperimentConfig;

pub const OUT_DIR_VAR: &str = "GRAVCHAN_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("checks failed: {}", .0.join("; "))]
    Check(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Config(_) => 2,
            Self::Numerical(_) => 3,
            Self::Check(_) => 4,
        }
    }
}

/// Parameter errors surfacing during validation are configuration errors;
/// everything else from the library is numerical.
impl From<gravchan::Error> for CliError {
    fn from(e: gravchan::Error) -> Self {
        use gravchan::Error::*;
        match e {
            InvalidParameter { .. }
            | MassDensityMismatch { .. }
            | OverlappingSpheres { .. }
            | UnstablePotential { .. }
            | Overcoupled { .. }
            | InconsistentDamping { .. }
            | NonSymmetric { .. }
            | Unsupported(_) => Self::Config(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub check: bool,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub bundle: ResultBundle,
    pub provenance: Provenance,
    pub written: Vec<PathBuf>,
}

pub fn read_config(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Output directory: explicit flag, then the environment, then the config.
pub fn resolve_out_dir(flag: Option<&Path>, config: &Value) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_VAR).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    config
        .pointer("/output/directory")
        .and_then(Value::as_str)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("gravchan-out"))
}

fn apply_seed(config: &mut Value, seed: u64) -> Result<(), CliError> {
    let obj = config
        .as_object_mut()
        .ok_or_else(|| CliError::Config("configuration must be a JSON object".into()))?;
    let ensemble = obj
        .entry("ensemble")
        .or_insert_with(|| Value::Object(Default::default()));
    ensemble
        .as_object_mut()
        .ok_or_else(|| CliError::Config("ensemble must be an object".into()))?
        .insert("seed".into(), Value::from(seed));
    Ok(())
}

/// Validates, runs and writes one configuration into `out`. Check failures
/// are reported through [`RunOutcome::bundle`], not as an error.
pub fn run_value(config: &Value, opts: &RunOptions, out: &Path) -> Result<RunOutcome, CliError> {
    let mut config = config.clone();
    if let Some(seed) = opts.seed {
        apply_seed(&mut config, seed)?;
    }
    let cfg = ExperimentConfig::from_value(&config)?;
    let bundle = experiments::run_experiment(&cfg)?;
    let uses_seed = matches!(
        cfg.experiment,
        config::Experiment::Trajectories | config::Experiment::OracleCompare
    );
    let provenance = Provenance {
        experiment: cfg.experiment.name().to_string(),
        seed: uses_seed.then_some(cfg.ensemble.seed),
        version: format!(
            "gravchan-cli {} / gravchan {}",
            env!("CARGO_PKG_VERSION"),
            gravchan::VERSION
        ),
        config,
    };
    let written = write_bundle(&bundle, &provenance, out, &cfg.output.formats, opts.check)?;
    Ok(RunOutcome {
        bundle,
        provenance,
        written,
    })
}

/// `run` command: like [`run_value`], but failed checks become an error
/// when `opts.check` is set.
pub fn run(config: &Value, opts: &RunOptions, out: &Path) -> Result<RunOutcome, CliError> {
    let outcome = run_value(config, opts, out)?;
    if opts.check {
        let failed = outcome.bundle.failed_checks();
        if !failed.is_empty() {
            return Err(CliError::Check(failed));
        }
    }
    Ok(outcome)
}

/// `sweep` command.
pub fn run_sweep(
    config: &Value,
    param: &str,
    grid: &str,
    opts: &RunOptions,
    out: &Path,
) -> Result<Vec<RunOutcome>, CliError> {
    let points = sweep::parse_grid(grid)?;
    let outcomes = sweep::sweep(config, param, &points, opts, out)?;
    if opts.check {
        let failed: Vec<String> = outcomes
            .iter()
            .enumerate()
            .flat_map(|(i, o)| {
                o.bundle
                    .failed_checks()
                    .into_iter()
                    .map(move |f| format!("point {i}: {f}"))
            })
            .collect();
        if !failed.is_empty() {
            return Err(CliError::Check(failed));
        }
    }
    Ok(outcomes)
}
