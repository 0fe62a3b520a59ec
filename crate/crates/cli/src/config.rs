//! Run configuration: a flat TOML file, command-line overrides and the
//! `MESOSPEC_SEED` environment variable, merged and validated up front.
//!
//! Precedence is flags > file > environment > defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use mesospec::eigensolve::DEFAULT_ORACLE_CAP;
use mesospec::laws::LimitingLaw;
use mesospec::meso::{in_bulk, limiting_law, BULK_MARGIN, MIN_REALIZATIONS};
use mesospec::{
    DistributionKind, EnsembleKind, EnsembleSpec, EntryDistribution, MesoGrid, SeedSpec,
};
use serde::Serialize;

pub const SEED_ENV: &str = "MESOSPEC_SEED";

const KNOWN_KEYS: &[&str] = &[
    "experiment",
    "ensemble",
    "N",
    "c",
    "entry_dist",
    "scale",
    "seed",
    "alpha",
    "alphas",
    "lambda",
    "offsets",
    "lambdas",
    "grid_points",
    "N_list",
    "M",
    "min_M",
    "workers",
    "output_dir",
    "format",
    "trials",
    "oracle_cap",
    "deltas",
    "strict",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Density,
    Fluct,
    Scaling,
    OracleCheck,
    Laws,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Density => "density",
            Self::Fluct => "fluct",
            Self::Scaling => "scaling",
            Self::OracleCheck => "oracle-check",
            Self::Laws => "laws",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "density" => Ok(Self::Density),
            "fluct" => Ok(Self::Fluct),
            "scaling" => Ok(Self::Scaling),
            "oracle-check" | "oracle_check" => Ok(Self::OracleCheck),
            "laws" => Ok(Self::Laws),
            other => Err(format!(
                "unknown experiment `{other}` (expected density, fluct, scaling, oracle-check or laws)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Command-line overrides. Every field is optional; unset fields fall back to
/// the config file, then to the environment (seed only), then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat TOML config file; keys mirror the flag names.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// sample_covariance (default) or wigner.
    #[arg(long)]
    pub ensemble: Option<String>,

    /// Matrix dimension [density 1024, fluct 512, oracle-check 32].
    #[arg(long = "N", value_name = "N")]
    pub n: Option<usize>,

    /// Aspect ratio m/N for sample_covariance [2].
    #[arg(long)]
    pub c: Option<f64>,

    /// gaussian (default), rademacher or uniform.
    #[arg(long = "entry-dist")]
    pub entry_dist: Option<String>,

    /// Entry standard deviation (u or v) [1].
    #[arg(long)]
    pub scale: Option<f64>,

    /// Master seed [MESOSPEC_SEED, else 0].
    #[arg(long)]
    pub seed: Option<u64>,

    /// Resolution exponent, η = N^(−α) [density/scaling 0.5, fluct 0.25 (wigner 0.1)].
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Several exponents for one scaling study, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,

    /// Base point for fluct and scaling [bulk centre of the limiting law].
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,

    /// Offsets τ in units of η, comma separated [0,1,2,4].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub offsets: Option<Vec<f64>>,

    /// Explicit density grid, comma separated [evenly spaced inset bulk grid].
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambdas: Option<Vec<f64>>,

    /// Number of points on generated grids [21].
    #[arg(long = "grid-points")]
    pub grid_points: Option<usize>,

    /// Matrix sizes for the scaling study [256,512,1024].
    #[arg(long = "N-list", value_name = "N_LIST", value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,

    /// Realizations [density 20, fluct 4000, scaling 500].
    #[arg(long = "M", value_name = "M")]
    pub m: Option<usize>,

    /// Smallest realization count accepted by fluct [30].
    #[arg(long = "min-M", value_name = "MIN_M")]
    pub min_m: Option<usize>,

    /// Worker threads [available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,

    /// Output directory [mesospec-out].
    #[arg(long = "output-dir", short = 'o')]
    pub output_dir: Option<PathBuf>,

    /// Table format [csv].
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,

    /// Random matrices for oracle-check [10].
    #[arg(long)]
    pub trials: Option<usize>,

    /// Largest N accepted by the direct resolvent [128].
    #[arg(long = "oracle-cap")]
    pub oracle_cap: Option<usize>,

    /// Kernel separations for laws [0,1,2,3,4,5,10,20,50,100].
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,

    /// Exit with status 3 when a tolerance check fails.
    #[arg(long)]
    pub strict: bool,
}

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub ensemble: EnsembleSpec,
    pub alpha: f64,
    /// Exponents of a scaling study.
    pub alphas: Vec<f64>,
    pub lambda: f64,
    /// Fluctuation grid (fluct only).
    pub grid: Option<MesoGrid>,
    /// Density grid (density) or analytic curve grid (laws).
    pub lambdas: Vec<f64>,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "min_M")]
    pub min_m: usize,
    pub workers: usize,
    pub output_dir: PathBuf,
    pub format: OutputFormat,
    pub trials: usize,
    pub oracle_cap: usize,
    pub deltas: Vec<f64>,
    pub strict: bool,
}

impl RunConfig {
    pub fn law(&self) -> LimitingLaw {
        limiting_law(&self.ensemble)
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

// Typed lookups into the flat file table.

struct FileTable(toml::Table);

impl FileTable {
    fn parse(contents: &str) -> Result<Self> {
        let table: toml::Table = contents
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("config", e.message().to_string()))?;
        if let Some(key) = table.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
            return Err(ConfigError::new(key.as_str(), "unknown key"));
        }
        Ok(Self(table))
    }

    fn mismatch(key: &str, expected: &str, got: &toml::Value) -> ConfigError {
        ConfigError::new(
            key,
            format!("expected {expected}, found {}", got.type_str()),
        )
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Float(x)) => Ok(Some(*x)),
            Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(Self::mismatch(key, "a number", v)),
        }
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(toml::Value::Integer(i)) => Err(ConfigError::new(
                key,
                format!("must be non-negative, got {i}"),
            )),
            Some(v) => Err(Self::mismatch(key, "a non-negative integer", v)),
        }
    }

    fn size(&self, key: &str) -> Result<Option<usize>> {
        self.uint(key)?
            .map(|v| usize::try_from(v).map_err(|_| ConfigError::new(key, "value too large")))
            .transpose()
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(Self::mismatch(key, "a string", v)),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(Self::mismatch(key, "a boolean", v)),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Float(x) => Ok(*x),
                    toml::Value::Integer(i) => Ok(*i as f64),
                    other => Err(Self::mismatch(key, "an array of numbers", other)),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(Self::mismatch(key, "an array of numbers", v)),
        }
    }

    fn sizes(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(toml::Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
                    other => Err(Self::mismatch(
                        key,
                        "an array of non-negative integers",
                        other,
                    )),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(Self::mismatch(key, "an array of non-negative integers", v)),
        }
    }
}

fn parse_named<T: FromStr<Err = String>>(field: &str, s: &str) -> Result<T> {
    s.parse().map_err(|e| ConfigError::new(field, e))
}

fn check_alpha(field: &str, a: f64) -> Result<()> {
    if a > 0.0 && a < 1.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must lie in (0, 1), got {a}"),
        ))
    }
}

/// Merges the sources and validates the result. `experiment` comes from the
/// subcommand; a file `experiment` key must agree with it.
pub fn parse_config(
    experiment: Experiment,
    file_contents: Option<&str>,
    flags: &Overrides,
    env_seed: Option<&str>,
) -> Result<RunConfig> {
    let file = FileTable::parse(file_contents.unwrap_or(""))?;

    if let Some(e) = file.string("experiment")? {
        let named: Experiment = parse_named("experiment", &e)?;
        if named != experiment {
            return Err(ConfigError::new(
                "experiment",
                format!(
                    "file says `{}` but the command is `{}`",
                    named.name(),
                    experiment.name()
                ),
            ));
        }
    }

    let kind = match (&flags.ensemble, file.string("ensemble")?) {
        (Some(s), _) => parse_named("ensemble", s)?,
        (None, Some(s)) => parse_named("ensemble", &s)?,
        (None, None) => EnsembleKind::SampleCovariance,
    };
    let dist_kind = match (&flags.entry_dist, file.string("entry_dist")?) {
        (Some(s), _) => parse_named("entry_dist", s)?,
        (None, Some(s)) => parse_named("entry_dist", &s)?,
        (None, None) => DistributionKind::Gaussian,
    };
    let scale = flags.scale.or(file.float("scale")?).unwrap_or(1.0);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(ConfigError::new(
            "scale",
            format!("must be positive, got {scale}"),
        ));
    }
    let c = flags.c.or(file.float("c")?).unwrap_or(2.0);
    if kind == EnsembleKind::SampleCovariance {
        if !(c.is_finite() && c > 0.0) {
            return Err(ConfigError::new("c", format!("must be positive, got {c}")));
        }
        if dist_kind != DistributionKind::Gaussian {
            return Err(ConfigError::new(
                "entry_dist",
                "sample_covariance is defined for gaussian entries only",
            ));
        }
    }

    let env_seed = env_seed
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| ConfigError::new(SEED_ENV, format!("not an unsigned integer: `{s}`")))
        })
        .transpose()?;
    let master_seed = flags.seed.or(file.uint("seed")?).or(env_seed).unwrap_or(0);

    let default_n = match experiment {
        Experiment::Density => 1024,
        Experiment::OracleCheck => 32,
        _ => 512,
    };
    let n = flags.n.or(file.size("N")?).unwrap_or(default_n);
    if n == 0 {
        return Err(ConfigError::new("N", "must be at least 1"));
    }

    let entry_dist = EntryDistribution::new(dist_kind, scale)
        .map_err(|e| ConfigError::new("scale", e.to_string()))?;
    let seed = SeedSpec::new(master_seed, 0);
    let ensemble = match kind {
        EnsembleKind::Wigner => EnsembleSpec::wigner(n, entry_dist, seed),
        EnsembleKind::SampleCovariance => EnsembleSpec::sample_covariance(n, c, scale, seed),
    };
    if kind == EnsembleKind::SampleCovariance && ensemble.sample_count() == 0 {
        return Err(ConfigError::new(
            "c",
            format!("round(c·N) is zero for c={c}, N={n}"),
        ));
    }
    let law = limiting_law(&ensemble);

    let default_alpha = match (experiment, kind) {
        (Experiment::Fluct, EnsembleKind::Wigner) => 0.1,
        (Experiment::Fluct, EnsembleKind::SampleCovariance) => 0.25,
        _ => 0.5,
    };
    let alpha = flags
        .alpha
        .or(file.float("alpha")?)
        .unwrap_or(default_alpha);
    check_alpha("alpha", alpha)?;
    let alphas = match flags.alphas.clone().or(file.floats("alphas")?) {
        Some(list) => {
            if list.is_empty() {
                return Err(ConfigError::new("alphas", "must not be empty"));
            }
            for &a in &list {
                check_alpha("alphas", a)?;
            }
            list
        }
        None => vec![alpha],
    };

    let lambda = flags
        .lambda
        .or(file.float("lambda")?)
        .unwrap_or_else(|| law.bulk_centre());
    if !lambda.is_finite() {
        return Err(ConfigError::new("lambda", "must be finite"));
    }

    let grid_points = flags
        .grid_points
        .or(file.size("grid_points")?)
        .unwrap_or(21);

    let default_m = match experiment {
        Experiment::Density => 20,
        Experiment::Fluct => 4000,
        Experiment::Scaling => 500,
        _ => 1,
    };
    let m = flags.m.or(file.size("M")?).unwrap_or(default_m);
    let min_m = flags
        .min_m
        .or(file.size("min_M")?)
        .unwrap_or(MIN_REALIZATIONS);
    if min_m < 2 {
        return Err(ConfigError::new("min_M", "must be at least 2"));
    }
    match experiment {
        Experiment::Density if m == 0 => {
            return Err(ConfigError::new("M", "need at least one realization"))
        }
        Experiment::Fluct if m < min_m => {
            return Err(ConfigError::new(
                "M",
                format!("{m} realizations is below the minimum of {min_m}"),
            ))
        }
        Experiment::Scaling if m < 2 => {
            return Err(ConfigError::new(
                "M",
                "a variance needs at least two realizations",
            ))
        }
        _ => {}
    }

    let grid = if experiment == Experiment::Fluct {
        let offsets = flags
            .offsets
            .clone()
            .or(file.floats("offsets")?)
            .unwrap_or_else(|| vec![0.0, 1.0, 2.0, 4.0]);
        Some(
            MesoGrid::new(lambda, alpha, offsets, n)
                .map_err(|e| ConfigError::new("offsets", e.to_string()))?,
        )
    } else {
        None
    };

    let explicit_lambdas = flags.lambdas.clone().or(file.floats("lambdas")?);
    let lambdas = match experiment {
        Experiment::Density => {
            let lambdas = match explicit_lambdas {
                Some(l) => l,
                None => mesospec::meso::bulk_grid(&law, grid_points),
            };
            if lambdas.is_empty() {
                return Err(ConfigError::new("lambdas", "need at least one grid point"));
            }
            if let Some(bad) = lambdas.iter().find(|&&l| !in_bulk(&law, l)) {
                let (lo, hi) = law.support().inset(BULK_MARGIN);
                return Err(ConfigError::new(
                    "lambdas",
                    format!("{bad} lies outside the bulk [{lo}, {hi}]"),
                ));
            }
            lambdas
        }
        Experiment::Laws => match explicit_lambdas {
            Some(l) => l,
            None => {
                let s = law.support();
                if grid_points < 2 {
                    return Err(ConfigError::new("grid_points", "need at least two points"));
                }
                (0..grid_points)
                    .map(|i| s.lower + s.width() * i as f64 / (grid_points - 1) as f64)
                    .collect()
            }
        },
        _ => Vec::new(),
    };

    let n_list = flags
        .n_list
        .clone()
        .or(file.sizes("N_list")?)
        .unwrap_or_else(|| vec![256, 512, 1024]);
    if experiment == Experiment::Scaling {
        let mut distinct = n_list.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(ConfigError::new(
                "N_list",
                "need at least three distinct sizes",
            ));
        }
        if distinct[0] == 0 {
            return Err(ConfigError::new("N_list", "sizes must be at least 1"));
        }
    }

    let workers = flags
        .workers
        .or(file.size("workers")?)
        .unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(ConfigError::new("workers", "must be at least 1"));
    }

    let output_dir = match (&flags.output_dir, file.string("output_dir")?) {
        (Some(p), _) => p.clone(),
        (None, Some(s)) => PathBuf::from(s),
        (None, None) => PathBuf::from("mesospec-out"),
    };
    let format = match (flags.format, file.string("format")?) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_named("format", &s)?,
        (None, None) => OutputFormat::Csv,
    };

    let trials = flags.trials.or(file.size("trials")?).unwrap_or(10);
    let oracle_cap = flags
        .oracle_cap
        .or(file.size("oracle_cap")?)
        .unwrap_or(DEFAULT_ORACLE_CAP);
    if experiment == Experiment::OracleCheck {
        if trials == 0 {
            return Err(ConfigError::new("trials", "must be at least 1"));
        }
        if n > oracle_cap {
            return Err(ConfigError::new(
                "N",
                format!("{n} exceeds the oracle cap of {oracle_cap}"),
            ));
        }
    }

    let deltas = flags
        .deltas
        .clone()
        .or(file.floats("deltas")?)
        .unwrap_or_else(|| vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0, 50.0, 100.0]);
    if deltas.iter().any(|d| !d.is_finite()) {
        return Err(ConfigError::new("deltas", "must be finite"));
    }

    let strict = flags.strict || file.boolean("strict")?.unwrap_or(false);

    Ok(RunConfig {
        experiment,
        ensemble,
        alpha,
        alphas,
        lambda,
        grid,
        lambdas,
        n_list,
        m,
        min_m,
        workers,
        output_dir,
        format,
        trials,
        oracle_cap,
        deltas,
        strict,
    })
}
