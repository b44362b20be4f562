//! Tabular sensor data: CSV ingestion, MinMax scaling, train/validation
//! splitting and a synthetic regime generator.
//!
//! The canonical layout has four inputs (the two string inlet temperatures,
//! the thermal fluid flow rate and the solar radiation) and one output (the
//! lower string outlet temperature).

use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

pub const FEATURE_COLUMNS: [&str; 4] = ["s1_temp", "s2_temp", "flow_rate", "solar_radiation"];
pub const TARGET_COLUMN: &str = "s4_temp";
pub const N_FEATURES: usize = FEATURE_COLUMNS.len();

/// Feature matrix plus regression target.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    target: Array1<f64>,
    column_names: Vec<String>,
}

impl Dataset {
    /// `column_names` lists the feature columns followed by the target column.
    pub fn new(
        features: Array2<f64>,
        target: Array1<f64>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        check_dim(features.nrows(), target.len())?;
        check_dim(features.ncols() + 1, column_names.len())?;
        if features.iter().chain(target.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "dataset contains non-finite values".into(),
            ));
        }
        Ok(Self {
            features: features.as_standard_layout().into_owned(),
            target,
            column_names,
        })
    }

    /// Builds a dataset with the canonical column names.
    pub fn from_parts(features: Array2<f64>, target: Array1<f64>) -> Result<Self> {
        let mut names: Vec<String> = FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect();
        names.push(TARGET_COLUMN.to_string());
        if features.ncols() != N_FEATURES {
            names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
            names.push("y".to_string());
        }
        Self::new(features, target, names)
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn target(&self) -> &Array1<f64> {
        &self.target
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn n_samples(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Dataset {
            features: self.features.select(Axis(0), indices),
            target: self.target.select(Axis(0), indices),
            column_names: self.column_names.clone(),
        })
    }

    pub(crate) fn with_features(&self, features: Array2<f64>) -> Dataset {
        Dataset {
            features,
            target: self.target.clone(),
            column_names: self.column_names.clone(),
        }
    }
}

/// What to do with rows holding unparseable or non-finite values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadRowPolicy {
    #[default]
    Error,
    Drop,
}

/// Expected CSV columns. Matching is by header name, in any order; extra
/// columns are ignored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub features: Vec<String>,
    pub target: String,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            features: FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
            target: TARGET_COLUMN.to_string(),
        }
    }
}

/// Reads a comma separated file with a header row into a [`Dataset`].
pub fn ingest_csv(
    path: impl AsRef<Path>,
    schema: &Schema,
    policy: BadRowPolicy,
) -> Result<Dataset> {
    let mut columns = schema.features.clone();
    columns.push(schema.target.clone());
    let table = read_columns(path.as_ref(), &columns, policy)?;
    if table.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let nf = schema.features.len();
    let features = table.slice(ndarray::s![.., ..nf]).to_owned();
    let target = table.column(nf).to_owned();
    Dataset::new(features, target, columns)
}

/// Reads only the named columns of a CSV file. An empty file body yields a
/// matrix with zero rows.
pub fn read_columns(path: &Path, columns: &[String], policy: BadRowPolicy) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let positions = columns
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    path: path.to_path_buf(),
                    column: name.clone(),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut n_rows = 0;
    let mut dropped = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        match parse_record(&record, &positions, columns, row + 1) {
            Ok(parsed) => {
                values.extend(parsed);
                n_rows += 1;
            }
            Err(e) if policy == BadRowPolicy::Drop => {
                log::debug!("dropping row: {e}");
                dropped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if dropped > 0 {
        log::info!("{}: dropped {dropped} malformed rows", path.display());
    }
    Ok(Array2::from_shape_vec((n_rows, columns.len()), values).expect("row lengths are uniform"))
}

fn parse_record(
    record: &csv::StringRecord,
    positions: &[usize],
    columns: &[String],
    row: usize,
) -> Result<Vec<f64>> {
    positions
        .iter()
        .zip(columns)
        .map(|(&pos, name)| {
            let raw = record.get(pos).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row,
                    column: name.clone(),
                    value: raw.to_string(),
                }),
            }
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if let csv::ErrorKind::Io(_) = e.kind() {
        if let csv::ErrorKind::Io(io) = e.into_kind() {
            return Error::io(path, io);
        }
        unreachable!()
    }
    Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Writes a dataset with its own column names as header.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(data.column_names())
        .map_err(|e| csv_error(path, e))?;
    for (row, y) in data.features().rows().into_iter().zip(data.target()) {
        let fields: Vec<String> = row
            .iter()
            .chain(std::iter::once(y))
            .map(|v| v.to_string())
            .collect();
        writer
            .write_record(&fields)
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

/// Per-column MinMax scaling state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Columns with zero range; they scale to 0.0.
    pub degenerate: Vec<bool>,
}

impl ScalerParams {
    /// Column extrema of `x`. Fails only on an empty matrix.
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mut mins = Vec::with_capacity(x.ncols());
        let mut maxs = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            mins.push(col.iter().copied().fold(f64::INFINITY, f64::min));
            maxs.push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        let degenerate = mins.iter().zip(&maxs).map(|(lo, hi)| hi == lo).collect();
        Ok(Self {
            mins,
            maxs,
            degenerate,
        })
    }

    pub fn n_columns(&self) -> usize {
        self.mins.len()
    }

    pub fn scale_value(&self, column: usize, v: f64) -> f64 {
        if self.degenerate[column] {
            0.0
        } else {
            (v - self.mins[column]) / (self.maxs[column] - self.mins[column])
        }
    }

    pub fn unscale_value(&self, column: usize, v: f64) -> f64 {
        if self.degenerate[column] {
            self.mins[column]
        } else {
            v * (self.maxs[column] - self.mins[column]) + self.mins[column]
        }
    }

    /// Scales every column; values outside the fitted range are not clamped.
    pub fn transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_dim(self.n_columns(), x.ncols())?;
        let mut out = x.as_standard_layout().into_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.scale_value(j, *v);
            }
        }
        Ok(out)
    }

    pub fn transform_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_columns(), x.len())?;
        Ok(x.iter()
            .enumerate()
            .map(|(j, &v)| self.scale_value(j, v))
            .collect())
    }

    pub fn inverse_transform(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        check_dim(self.n_columns(), x.ncols())?;
        let mut out = x.as_standard_layout().into_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.unscale_value(j, *v);
            }
        }
        Ok(out)
    }
}

/// Fits feature scaling on a (training) dataset.
pub fn fit_scaler(train: &Dataset) -> ScalerParams {
    ScalerParams::fit(train.features()).expect("datasets are never empty")
}

/// Scales the features of `data`; the target is left untouched.
pub fn apply_scaler(params: &ScalerParams, data: &Dataset) -> Result<Dataset> {
    Ok(data.with_features(params.transform(data.features())?))
}

/// MinMax scaling of the regression target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaler {
    pub min: f64,
    pub max: f64,
}

impl TargetScaler {
    pub fn fit(y: &Array1<f64>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            min: y.iter().copied().fold(f64::INFINITY, f64::min),
            max: y.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    fn range(&self) -> f64 {
        self.max - self.min
    }

    pub fn scale(&self, v: f64) -> f64 {
        if self.range() == 0.0 {
            0.0
        } else {
            (v - self.min) / self.range()
        }
    }

    pub fn unscale(&self, v: f64) -> f64 {
        if self.range() == 0.0 {
            self.min
        } else {
            v * self.range() + self.min
        }
    }
}

/// Seeded train/validation partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            validation_fraction: 0.2,
            seed: 42,
        }
    }
}

/// Row indices of the (train, validation) partitions, each sorted ascending.
///
/// The validation size is `round(n * fraction)` and must leave both sides
/// non-empty.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.validation_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "validation fraction {f} is not in (0, 1)"
        )));
    }
    let n_val = (n as f64 * f).round() as usize;
    if n_val == 0 || n_val >= n {
        return Err(Error::InvalidParameter(format!(
            "validation fraction {f} leaves an empty partition for {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut validation = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    validation.sort_unstable();
    train.sort_unstable();
    Ok((train, validation))
}

pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, validation) = split_indices(data.n_samples(), spec)?;
    Ok((data.select(&train)?, data.select(&validation)?))
}

/// Output of [`synthesize`]: data plus the latent regime of every row.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub regimes: Vec<usize>,
}

pub const SYNTH_REGIMES: usize = 4;

struct Regime {
    center: [f64; 4],
    spread: [f64; 4],
    response: fn(&[f64; 4]) -> f64,
}

// Night/idle, morning warm-up, full production and low-flow stagnation.
// Centers are at least 10 spreads apart in every scaled coordinate pair.
const REGIMES: [Regime; SYNTH_REGIMES] = [
    Regime {
        center: [12.0, 14.0, 40.0, 60.0],
        spread: [1.2, 1.2, 12.0, 20.0],
        response: |x| 0.9 * x[1] + 1.0 + 0.004 * x[3] + 0.5 * ((x[0] - 12.0) / 1.5).sin(),
    },
    Regime {
        center: [30.0, 34.0, 350.0, 350.0],
        spread: [1.2, 1.2, 12.0, 20.0],
        response: |x| {
            x[1] + 8.0 * (x[3] / 300.0).tanh() - 0.03 * (x[2] - 350.0) + 0.4 * (x[0] - 30.0).powi(2)
        },
    },
    Regime {
        center: [48.0, 55.0, 700.0, 650.0],
        spread: [1.2, 1.2, 12.0, 20.0],
        response: |x| {
            x[1] + 12.0 * (x[3] / 650.0).powf(1.5) * (700.0 / x[2]) - 0.5 * (x[0] - 48.0).abs()
        },
    },
    Regime {
        center: [75.0, 80.0, 150.0, 900.0],
        spread: [1.2, 1.2, 12.0, 20.0],
        response: |x| x[0] + 10.0 + 0.02 * (x[3] - 900.0) + 3.0 * ((x[1] - 80.0) / 1.5).sin(),
    },
];

const RESPONSE_NOISE: f64 = 0.3;

/// Generates `n` rows from four well-separated operating regimes, each with
/// its own smooth response for the outlet temperature. Deterministic in
/// `seed`.
pub fn synthesize(n: usize, seed: u64) -> Result<SyntheticData> {
    if n < 10 {
        return Err(Error::InvalidParameter(format!(
            "synthetic dataset needs at least 10 rows, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let mut features = Array2::zeros((n, N_FEATURES));
    let mut target = Array1::zeros(n);
    let mut regimes = Vec::with_capacity(n);
    for i in 0..n {
        let r = rng.random_range(0..SYNTH_REGIMES);
        let regime = &REGIMES[r];
        let mut x = [0.0; 4];
        for j in 0..4 {
            x[j] = regime.center[j] + regime.spread[j] * unit.sample(&mut rng);
        }
        // Physical floor for flow and radiation.
        x[2] = x[2].max(1.0);
        x[3] = x[3].max(0.0);
        target[i] = (regime.response)(&x) + RESPONSE_NOISE * unit.sample(&mut rng);
        for j in 0..4 {
            features[[i, j]] = x[j];
        }
        regimes.push(r);
    }
    Ok(SyntheticData {
        dataset: Dataset::from_parts(features, target)?,
        regimes,
    })
}
