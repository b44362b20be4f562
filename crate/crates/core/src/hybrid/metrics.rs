//! Regression error metrics and the per-cluster error report.

use serde::{Deserialize, Serialize};

/// Denominators at or below this are treated as zero.
const DENOMINATOR_FLOOR: f64 = 1e-9;

/// Errors of one group of predictions, in the units of the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub mse: f64,
    pub mae: f64,
    /// Mean of `ln(1 + (y - yhat)^2 / 2)`.
    pub lmls: f64,
    /// Percent.
    pub mape: f64,
    /// MAE divided by the in-sample MAE of predicting the training mean.
    /// Not defined when no scale is known.
    pub mase: Option<f64>,
    pub smape: f64,
    pub nmse: f64,
}

/// Samples left out of the relative metrics because their denominator
/// vanished.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub mape: usize,
    pub smape: usize,
    pub nmse: usize,
}

impl MetricRow {
    pub const NAMES: [&'static str; 7] = ["MSE", "MAE", "LMLS", "MAPE", "MASE", "SMAPE", "NMSE"];

    /// Values in [`Self::NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            Some(self.mse),
            Some(self.mae),
            Some(self.lmls),
            Some(self.mape),
            self.mase,
            Some(self.smape),
            Some(self.nmse),
        ]
    }
}

/// Computes every metric for observed `y` and predicted `yhat`.
///
/// Neither MAPE nor SMAPE takes the absolute value of its denominator, so
/// samples with `y <= 1e-9` are skipped for MAPE and samples with
/// `y + yhat <= 1e-9` for SMAPE. NMSE is skipped as a whole when `mean(y) * mean(yhat) <= 1e-9`.
/// A metric with every sample skipped is 0.
pub fn regression_metrics(
    y: &[f64],
    yhat: &[f64],
    mase_scale: Option<f64>,
) -> (MetricRow, SkipCounts) {
    assert_eq!(
        y.len(),
        yhat.len(),
        "observation and prediction lengths differ"
    );
    assert!(!y.is_empty(), "metrics of an empty group");
    let m = y.len() as f64;
    let mut skips = SkipCounts::default();
    let (mut se, mut ae, mut lmls) = (0.0, 0.0, 0.0);
    let (mut ape, mut n_ape) = (0.0, 0usize);
    let (mut sape, mut n_sape) = (0.0, 0usize);
    for (&t, &p) in y.iter().zip(yhat) {
        let e = t - p;
        se += e * e;
        ae += e.abs();
        lmls += (1.0 + 0.5 * e * e).ln();
        if t > DENOMINATOR_FLOOR {
            ape += e.abs() / t;
            n_ape += 1;
        } else {
            skips.mape += 1;
        }
        if t + p > DENOMINATOR_FLOOR {
            sape += e.abs() / (t + p);
            n_sape += 1;
        } else {
            skips.smape += 1;
        }
    }
    let mean_y = y.iter().sum::<f64>() / m;
    let mean_p = yhat.iter().sum::<f64>() / m;
    let nmse_denominator = mean_y * mean_p;
    let nmse = if nmse_denominator > DENOMINATOR_FLOOR {
        se / m / nmse_denominator
    } else {
        skips.nmse = y.len();
        0.0
    };
    let mae = ae / m;
    let row = MetricRow {
        mse: se / m,
        mae,
        lmls: lmls / m,
        mape: if n_ape > 0 {
            100.0 * ape / n_ape as f64
        } else {
            0.0
        },
        mase: mase_scale.filter(|s| *s > 0.0).map(|s| mae / s),
        smape: if n_sape > 0 {
            2.0 * sape / n_sape as f64
        } else {
            0.0
        },
        nmse,
    };
    (row, skips)
}

/// Mean absolute deviation from the mean, the MASE scale of a cluster.
pub fn naive_mean_scale(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).abs()).sum::<f64>() / y.len() as f64
}

/// Per-cluster metrics plus their size-weighted average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `None` for clusters that received no validation samples.
    pub per_cluster: Vec<Option<MetricRow>>,
    pub weighted_average: MetricRow,
    pub cluster_sizes: Vec<usize>,
    pub skipped: Vec<SkipCounts>,
}

/// One group's observations, predictions and MASE scale.
#[derive(Debug, Clone, Default)]
pub struct Group {
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub mase_scale: Option<f64>,
}

impl ErrorReport {
    /// Fails only when every group is empty.
    pub fn from_groups(groups: &[Group]) -> Option<Self> {
        let mut per_cluster = Vec::with_capacity(groups.len());
        let mut skipped = Vec::with_capacity(groups.len());
        let cluster_sizes: Vec<usize> = groups.iter().map(|g| g.observed.len()).collect();
        for g in groups {
            if g.observed.is_empty() {
                per_cluster.push(None);
                skipped.push(SkipCounts::default());
            } else {
                let (row, skips) = regression_metrics(&g.observed, &g.predicted, g.mase_scale);
                per_cluster.push(Some(row));
                skipped.push(skips);
            }
        }
        let weighted_average = weighted_average(&per_cluster, &cluster_sizes)?;
        Some(Self {
            per_cluster,
            weighted_average,
            cluster_sizes,
            skipped,
        })
    }

    pub fn k(&self) -> usize {
        self.per_cluster.len()
    }
}

/// `sum_j n_j v_j / sum_j n_j` over clusters with `n_j > 0`. MASE is
/// averaged only when every non-empty cluster has it.
pub fn weighted_average(rows: &[Option<MetricRow>], sizes: &[usize]) -> Option<MetricRow> {
    let present: Vec<(&MetricRow, f64)> = rows
        .iter()
        .zip(sizes)
        .filter_map(|(r, &n)| r.as_ref().filter(|_| n > 0).map(|r| (r, n as f64)))
        .collect();
    if present.is_empty() {
        return None;
    }
    let total: f64 = present.iter().map(|(_, n)| n).sum();
    let avg =
        |f: &dyn Fn(&MetricRow) -> f64| present.iter().map(|(r, n)| n * f(r)).sum::<f64>() / total;
    let mase = if present.iter().all(|(r, _)| r.mase.is_some()) {
        Some(avg(&|r| r.mase.expect("checked")))
    } else {
        None
    };
    Some(MetricRow {
        mse: avg(&|r| r.mse),
        mae: avg(&|r| r.mae),
        lmls: avg(&|r| r.lmls),
        mape: avg(&|r| r.mape),
        mase,
        smape: avg(&|r| r.smape),
        nmse: avg(&|r| r.nmse),
    })
}
