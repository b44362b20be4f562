//! Command-line flags, `key = value` config files and the resolved run
//! configuration.
//!
//! Every flag of [`RunArgs`] can also be given in the file named by
//! `--config`, using the flag name without dashes as key (`k-min = 2`).
//! Flags given on the command line win over the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybreg::mlp::{Activation, Solver, TrainLimits};
use hybreg::{ClusterKind, GridSpec, HybridMode, Linkage, SplitSpec};

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(
    name = "hybreg",
    version,
    about = "Cluster a sensor dataset, fit one MLP per cluster and report errors"
)]
pub struct Cli {
    /// Log progress to stderr; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic four-regime dataset to <out>/synth.csv.
    Synth {
        /// Number of rows.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score every k in [k-min, k-max] for each clustering kind.
    Scan(RunArgs),
    /// Split, cluster, grid-search and train one hybrid model, then evaluate it.
    Train(RunArgs),
    /// Predict with a saved model archive.
    Predict {
        /// Archive written by `train`.
        #[arg(long)]
        archive: PathBuf,
        /// CSV with the four feature columns.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Render SVG charts from artifacts written by `scan`, `train` or `compare`.
    Plot {
        #[arg(long, value_enum)]
        what: PlotKind,
        /// Directory holding the artifacts; defaults to the output directory.
        #[arg(long)]
        artifacts: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train one hybrid per clustering kind and compare their errors.
    Compare(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// 2-D LDA scatter per clustering kind.
    Lda,
    /// Real vs predicted validation targets per cluster.
    Fit,
}

/// Flags shared by every subcommand. Values stay strings until merged with
/// the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// File of `key = value` lines supplying defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Input CSV (s1_temp, s2_temp, flow_rate, solar_radiation, s4_temp).
    #[arg(long)]
    pub data: Option<String>,
    /// Use N synthetic rows instead of a CSV file.
    #[arg(long, value_name = "N")]
    pub synth: Option<String>,
    /// Clustering kind(s): kmeans, gaussian_mixture, agglomerative,
    /// spectral, or `all`. Comma separated.
    #[arg(long)]
    pub kind: Option<String>,
    /// Number of clusters.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub k_min: Option<String>,
    #[arg(long)]
    pub k_max: Option<String>,
    #[arg(long)]
    pub neurons_min: Option<String>,
    #[arg(long)]
    pub neurons_max: Option<String>,
    /// Comma separated: tanh, relu.
    #[arg(long)]
    pub activations: Option<String>,
    /// Comma separated: lbfgs, sgd, adam.
    #[arg(long)]
    pub solvers: Option<String>,
    #[arg(long)]
    pub folds: Option<String>,
    /// Iteration (L-BFGS) or epoch (SGD, Adam) cap per training run.
    #[arg(long)]
    pub max_iter: Option<String>,
    #[arg(long)]
    pub val_fraction: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Report format: text, json or both.
    #[arg(long)]
    pub format: Option<String>,
    /// local_models or label_feature.
    #[arg(long)]
    pub mode: Option<String>,
    /// Agglomerative linkage: ward, complete, average, single.
    #[arg(long)]
    pub linkage: Option<String>,
    /// Spectral RBF gamma; defaults to the median-distance heuristic.
    #[arg(long)]
    pub gamma: Option<String>,
}

impl RunArgs {
    fn given(&self) -> [(&'static str, Option<&String>); 19] {
        [
            ("data", self.data.as_ref()),
            ("synth", self.synth.as_ref()),
            ("kind", self.kind.as_ref()),
            ("k", self.k.as_ref()),
            ("k-min", self.k_min.as_ref()),
            ("k-max", self.k_max.as_ref()),
            ("neurons-min", self.neurons_min.as_ref()),
            ("neurons-max", self.neurons_max.as_ref()),
            ("activations", self.activations.as_ref()),
            ("solvers", self.solvers.as_ref()),
            ("folds", self.folds.as_ref()),
            ("max-iter", self.max_iter.as_ref()),
            ("val-fraction", self.val_fraction.as_ref()),
            ("seed", self.seed.as_ref()),
            ("out", self.out.as_ref()),
            ("format", self.format.as_ref()),
            ("mode", self.mode.as_ref()),
            ("linkage", self.linkage.as_ref()),
            ("gamma", self.gamma.as_ref()),
        ]
    }
}

/// Which report files to write.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    #[default]
    Both,
}

impl ReportFormat {
    pub fn text(self) -> bool {
        matches!(self, ReportFormat::Text | ReportFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, ReportFormat::Json | ReportFormat::Both)
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" | "structured" => Ok(ReportFormat::Json),
            "both" => Ok(ReportFormat::Both),
            other => Err(format!("expected text, json or both, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Csv(PathBuf),
    /// Rows drawn by the synthetic generator with the run seed.
    Synthetic(usize),
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: Option<DataSource>,
    /// Empty means the command's default.
    pub kinds: Vec<ClusterKind>,
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub grid: GridSpec,
    pub validation_fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub format: ReportFormat,
    pub mode: HybridMode,
    pub linkage: Linkage,
    pub gamma: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            source: None,
            kinds: Vec::new(),
            k: 4,
            k_min: 2,
            k_max: 8,
            grid: GridSpec {
                seed: DEFAULT_SEED,
                ..GridSpec::default()
            },
            validation_fraction: SplitSpec::default().validation_fraction,
            seed: DEFAULT_SEED,
            out: PathBuf::from("out"),
            format: ReportFormat::Both,
            mode: HybridMode::LocalModels,
            linkage: Linkage::Ward,
            gamma: None,
        }
    }
}

impl RunConfig {
    /// Merges the config file (if any) with the flags and validates the
    /// result.
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let mut values = match &args.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        for (key, value) in args.given() {
            if let Some(v) = value {
                values.insert(key.to_string(), v.clone());
            }
        }
        Self::from_values(&values)
    }

    fn from_values(values: &BTreeMap<String, String>) -> Result<Self> {
        let d = RunConfig::default();
        let get = |key: &str| values.get(key).map(String::as_str);

        let source = match (get("data"), get("synth")) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "--data and --synth are mutually exclusive".into(),
                ))
            }
            (Some(path), None) => Some(DataSource::Csv(PathBuf::from(path))),
            (None, Some(n)) => Some(DataSource::Synthetic(parse("synth", n)?)),
            (None, None) => None,
        };
        let seed = opt("seed", get("seed"))?.unwrap_or(d.seed);
        let neurons_min =
            opt("neurons-min", get("neurons-min"))?.unwrap_or(*d.grid.neurons.start());
        let neurons_max = opt("neurons-max", get("neurons-max"))?.unwrap_or(*d.grid.neurons.end());
        let grid = GridSpec {
            neurons: neurons_min..=neurons_max,
            activations: match get("activations") {
                Some(v) => list::<Activation>("activations", v)?,
                None => d.grid.activations,
            },
            solvers: match get("solvers") {
                Some(v) => list::<Solver>("solvers", v)?,
                None => d.grid.solvers,
            },
            folds: opt("folds", get("folds"))?.unwrap_or(d.grid.folds),
            seed,
            limits: TrainLimits {
                max_iter: opt("max-iter", get("max-iter"))?.unwrap_or(d.grid.limits.max_iter),
                ..d.grid.limits
            },
        };
        grid.validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;

        let config = RunConfig {
            source,
            kinds: match get("kind") {
                Some(v) => kinds(v)?,
                None => Vec::new(),
            },
            k: opt("k", get("k"))?.unwrap_or(d.k),
            k_min: opt("k-min", get("k-min"))?.unwrap_or(d.k_min),
            k_max: opt("k-max", get("k-max"))?.unwrap_or(d.k_max),
            grid,
            validation_fraction: opt("val-fraction", get("val-fraction"))?
                .unwrap_or(d.validation_fraction),
            seed,
            out: get("out").map(PathBuf::from).unwrap_or(d.out),
            format: opt("format", get("format"))?.unwrap_or(d.format),
            mode: opt("mode", get("mode"))?.unwrap_or(d.mode),
            linkage: opt("linkage", get("linkage"))?.unwrap_or(d.linkage),
            gamma: opt("gamma", get("gamma"))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(CliError::Usage("--k must be at least 1".into()));
        }
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(CliError::Usage(format!(
                "k range {}..={} must satisfy 2 <= k-min <= k-max",
                self.k_min, self.k_max
            )));
        }
        let f = self.validation_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(CliError::Usage(format!(
                "--val-fraction must lie in (0, 1), got {f}"
            )));
        }
        if self.gamma.is_some_and(|g| !(g > 0.0 && g.is_finite())) {
            return Err(CliError::Usage("--gamma must be positive".into()));
        }
        Ok(())
    }

    pub fn split(&self) -> SplitSpec {
        SplitSpec {
            validation_fraction: self.validation_fraction,
            seed: self.seed,
        }
    }

    /// Requested kinds, or `default` when none were given.
    pub fn kinds_or(&self, default: &[ClusterKind]) -> Vec<ClusterKind> {
        if self.kinds.is_empty() {
            default.to_vec()
        } else {
            self.kinds.clone()
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value `{value}` for {key}: {e}")))
}

fn opt<T: FromStr>(key: &str, value: Option<&str>) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    value.map(|v| parse(key, v)).transpose()
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    let items: Vec<T> = value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("{key} needs at least one value")));
    }
    Ok(items)
}

fn kinds(value: &str) -> Result<Vec<ClusterKind>> {
    if value.trim() == "all" {
        return Ok(ClusterKind::ALL.to_vec());
    }
    let mut out: Vec<ClusterKind> = Vec::new();
    for kind in list::<ClusterKind>("kind", value)? {
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    Ok(out)
}

/// Reads `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; underscores in keys are accepted in place of dashes.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_config(text: &str) -> std::result::Result<BTreeMap<String, String>, String> {
    let known = RunArgs::default().given().map(|(k, _)| k);
    let mut values = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = key.trim().replace('_', "-");
        if !known.contains(&key.as_str()) {
            return Err(format!("line {}: unknown key `{key}`", i + 1));
        }
        values.insert(key, value.trim().to_string());
    }
    Ok(values)
}
