//! Command-line harness around the `mesospec` library: configuration,
//! experiment orchestration and reproducible CSV/JSON output.
//!
//! A run validates its whole configuration, computes every result in memory
//! on a worker pool of the requested size, and only then writes the tables,
//! a `summary.json`, and finally `manifest.json`.

pub mod commands;
pub mod config;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::{SecondsFormat, Utc};
use mesospec::EnsembleKind;
use serde::Serialize;
use serde_json::Value;

pub use commands::Outcome;
pub use config::{parse_config, ConfigError, Experiment, OutputFormat, Overrides, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST_NAME: &str = "manifest.json";
pub const SUMMARY_NAME: &str = "summary.json";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("reading {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("computation failed: {0}")]
    Numerical(#[from] mesospec::Error),
    #[error("{0}")]
    OracleBreach(String),
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("tolerance check failed (see {0})")]
    Tolerance(PathBuf),
}

impl CliError {
    /// 1 for invalid input, 2 for numerical failures, 3 for a failed
    /// tolerance check under `--strict`.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::ReadConfig { .. } | CliError::Write { .. } => 1,
            CliError::Numerical(_) | CliError::OracleBreach(_) => 2,
            CliError::Tolerance(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub name: &'static str,
    pub seconds: f64,
}

/// Everything needed to reproduce a run, alongside when and how long it ran.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub version: &'static str,
    pub experiment: &'static str,
    pub config: &'a RunConfig,
    pub master_seed: u64,
    /// `m`, for the sample-covariance ensemble.
    pub realized_m: Option<usize>,
    /// `m / N`, for the sample-covariance ensemble.
    pub realized_ratio: Option<f64>,
    pub started_at: String,
    pub finished_at: String,
    pub phases: Vec<Phase>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub summary: Value,
    pub passed: Option<bool>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Reads the optional config file and the seed variable, then validates.
pub fn load_config(experiment: Experiment, flags: &Overrides) -> Result<RunConfig, CliError> {
    let contents = match &flags.config {
        Some(path) => {
            Some(
                std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                    path: path.clone(),
                    source,
                })?,
            )
        }
        None => None,
    };
    let env_seed = std::env::var(config::SEED_ENV).ok();
    Ok(parse_config(
        experiment,
        contents.as_deref(),
        flags,
        env_seed.as_deref(),
    )?)
}

pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started_at = now();
    let mut phases = Vec::new();

    let t = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .expect("thread pool");
    let outcome = pool.install(|| commands::execute(cfg))?;
    phases.push(Phase {
        name: "compute",
        seconds: t.elapsed().as_secs_f64(),
    });

    let t = Instant::now();
    let dir = cfg.output_dir.as_path();
    let write_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Write { path, source }
    };
    std::fs::create_dir_all(dir).map_err(write_err(dir))?;
    let mut artifacts = Vec::new();
    for table in &outcome.tables {
        let name = table.file_name(cfg.format);
        let bytes = table
            .encode(cfg.format)
            .map_err(write_err(&dir.join(&name)))?;
        artifacts
            .push(output::write_atomic(dir, &name, &bytes).map_err(write_err(&dir.join(&name)))?);
    }
    let summary_path = dir.join(SUMMARY_NAME);
    let bytes = output::json_bytes(&outcome.summary).map_err(write_err(&summary_path))?;
    artifacts
        .push(output::write_atomic(dir, SUMMARY_NAME, &bytes).map_err(write_err(&summary_path))?);
    phases.push(Phase {
        name: "write",
        seconds: t.elapsed().as_secs_f64(),
    });

    let sample_cov = cfg.ensemble.kind == EnsembleKind::SampleCovariance;
    let manifest = RunManifest {
        version: VERSION,
        experiment: cfg.experiment.name(),
        config: cfg,
        master_seed: cfg.ensemble.seed.master_seed,
        realized_m: sample_cov.then(|| cfg.ensemble.sample_count()),
        realized_ratio: sample_cov.then(|| cfg.ensemble.realized_ratio()),
        started_at,
        finished_at: now(),
        phases,
        artifacts: artifacts
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    let manifest_path = dir.join(MANIFEST_NAME);
    let bytes = output::json_bytes(&manifest).map_err(write_err(&manifest_path))?;
    output::write_atomic(dir, MANIFEST_NAME, &bytes).map_err(write_err(&manifest_path))?;

    if let Some(msg) = outcome.breach {
        return Err(CliError::OracleBreach(msg));
    }
    if cfg.strict && outcome.passed == Some(false) {
        return Err(CliError::Tolerance(summary_path));
    }
    Ok(RunReport {
        output_dir: dir.to_path_buf(),
        artifacts,
        summary: outcome.summary,
        passed: outcome.passed,
    })
}
