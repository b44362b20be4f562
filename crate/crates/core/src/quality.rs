//! Unsupervised cluster-quality indices (silhouette, Calinski-Harabasz,
//! Davies-Bouldin) and the scan over candidate cluster counts.
//!
//! All distances are Euclidean.

use std::ops::RangeInclusive;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, ClusterAssignment, ClusterConfig, ClusterKind};
use crate::error::{Error, Result};
use crate::linalg::{distance, mean_of_rows, row, squared_distance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub k: usize,
    pub silhouette: f64,
    pub calinski_harabasz: f64,
    pub davies_bouldin: f64,
    pub per_sample_silhouette: Vec<f64>,
}

fn require_two_clusters(data: &Array2<f64>, assignment: &ClusterAssignment) -> Result<()> {
    if assignment.k() < 2 {
        return Err(Error::InvalidParameter(format!(
            "quality indices need at least 2 clusters, got {}",
            assignment.k()
        )));
    }
    if assignment.len() != data.nrows() {
        return Err(Error::DimensionMismatch {
            expected: data.nrows(),
            actual: assignment.len(),
        });
    }
    Ok(())
}

fn barycenters(data: &Array2<f64>, assignment: &ClusterAssignment) -> Vec<Vec<f64>> {
    (0..assignment.k())
        .map(|j| mean_of_rows(data.view(), assignment.members(j)))
        .collect()
}

/// Mean silhouette and per-sample values.
///
/// For sample `i`, `x` is its mean distance to the other members of its
/// cluster and `y` the smallest mean distance to another cluster;
/// `s = (y - x) / max(x, y)`. Members of singleton clusters score 0.
pub fn silhouette(data: &Array2<f64>, assignment: &ClusterAssignment) -> Result<(f64, Vec<f64>)> {
    require_two_clusters(data, assignment)?;
    let data = data.as_standard_layout().into_owned();
    let n = data.nrows();
    let k = assignment.k();
    let labels = assignment.labels();
    let sizes = assignment.sizes();
    // sums[i * k + c]: total distance from i to the members of c.
    let mut sums = vec![0.0; n * k];
    for i in 0..n {
        for j in i + 1..n {
            let d = distance(row(&data, i), row(&data, j));
            sums[i * k + labels[j]] += d;
            sums[j * k + labels[i]] += d;
        }
    }
    let per_sample: Vec<f64> = (0..n)
        .map(|i| {
            let own = labels[i];
            if sizes[own] <= 1 {
                return 0.0;
            }
            let x = sums[i * k + own] / (sizes[own] - 1) as f64;
            let y = (0..k)
                .filter(|&c| c != own)
                .map(|c| sums[i * k + c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = x.max(y);
            if denom > 0.0 {
                (y - x) / denom
            } else {
                0.0
            }
        })
        .collect();
    let mean = per_sample.iter().sum::<f64>() / n as f64;
    Ok((mean, per_sample))
}

/// `(N - K) / (K - 1) * BGSS / WGSS`.
///
/// A zero within-group dispersion with positive between-group dispersion
/// yields `+inf`; both zero is an error.
pub fn calinski_harabasz(data: &Array2<f64>, assignment: &ClusterAssignment) -> Result<f64> {
    require_two_clusters(data, assignment)?;
    let data = data.as_standard_layout().into_owned();
    let n = data.nrows();
    let k = assignment.k();
    let global = mean_of_rows(data.view(), 0..n);
    let centers = barycenters(&data, assignment);
    let bgss: f64 = centers
        .iter()
        .zip(assignment.sizes())
        .map(|(g, &nj)| nj as f64 * squared_distance(g, &global))
        .sum();
    let wgss: f64 = assignment
        .labels()
        .iter()
        .enumerate()
        .map(|(i, &l)| squared_distance(row(&data, i), &centers[l]))
        .sum();
    if wgss == 0.0 {
        return if bgss > 0.0 {
            Ok(f64::INFINITY)
        } else {
            Err(Error::Degenerate("all samples are identical".into()))
        };
    }
    Ok((n - k) as f64 / (k - 1) as f64 * bgss / wgss)
}

/// Mean over clusters of the worst-case ratio `(d_j + d_j') / D_jj'`, with
/// `d_j` the mean member distance to the barycenter and `D_jj'` the
/// barycenter separation.
pub fn davies_bouldin(data: &Array2<f64>, assignment: &ClusterAssignment) -> Result<f64> {
    require_two_clusters(data, assignment)?;
    let data = data.as_standard_layout().into_owned();
    let k = assignment.k();
    let centers = barycenters(&data, assignment);
    let mut spread = vec![0.0; k];
    for (i, &l) in assignment.labels().iter().enumerate() {
        spread[l] += distance(row(&data, i), &centers[l]);
    }
    for (s, &nj) in spread.iter_mut().zip(assignment.sizes()) {
        *s /= nj as f64;
    }
    let mut total = 0.0;
    for j in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for jj in 0..k {
            if jj == j {
                continue;
            }
            let sep = distance(&centers[j], &centers[jj]);
            if sep == 0.0 {
                return Err(Error::Degenerate(format!(
                    "clusters {j} and {jj} share a barycenter"
                )));
            }
            worst = worst.max((spread[j] + spread[jj]) / sep);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

pub fn evaluate(data: &Array2<f64>, assignment: &ClusterAssignment) -> Result<QualityReport> {
    let (silhouette, per_sample_silhouette) = silhouette(data, assignment)?;
    Ok(QualityReport {
        k: assignment.k(),
        silhouette,
        calinski_harabasz: calinski_harabasz(data, assignment)?,
        davies_bouldin: davies_bouldin(data, assignment)?,
        per_sample_silhouette,
    })
}

/// Adjusted Rand index between two labelings of the same samples. Returns
/// 1.0 when both labelings are trivial in the same way.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = (0..ka)
        .map(|i| pairs(table[i * kb..(i + 1) * kb].iter().sum()))
        .sum();
    let sum_cols: f64 = (0..kb)
        .map(|j| pairs((0..ka).map(|i| table[i * kb + j]).sum()))
        .sum();
    let total = pairs(n as u64);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_rows * sum_cols / total;
    let max = 0.5 * (sum_rows + sum_cols);
    if max == expected {
        return 1.0;
    }
    (sum_cells - expected) / (max - expected)
}

/// One fitted cluster count of a scan.
#[derive(Debug, Clone)]
pub struct ScanRow {
    pub k: usize,
    pub outcome: std::result::Result<(QualityReport, ClusterAssignment), String>,
}

impl ScanRow {
    pub fn report(&self) -> Option<&QualityReport> {
        self.outcome.as_ref().ok().map(|(r, _)| r)
    }
}

#[derive(Debug, Clone)]
pub struct ScanReport {
    pub kind: ClusterKind,
    pub rows: Vec<ScanRow>,
    pub best_by_silhouette: Option<usize>,
    pub best_by_calinski_harabasz: Option<usize>,
    pub best_by_davies_bouldin: Option<usize>,
    /// Silhouette winner, larger Calinski-Harabasz on ties.
    pub best_k: Option<usize>,
}

impl ScanReport {
    pub fn row(&self, k: usize) -> Option<&ScanRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    pub fn best(&self) -> Option<&ScanRow> {
        self.best_k.and_then(|k| self.row(k))
    }
}

/// Fits `kind` for every k in `k_range` and scores each clustering.
pub fn scan_k(
    data: &Array2<f64>,
    kind: ClusterKind,
    k_range: RangeInclusive<usize>,
    seed: u64,
) -> Result<ScanReport> {
    scan_k_with(data, &ClusterConfig::new(kind, 2, seed), k_range)
}

/// Like [`scan_k`], taking every setting except k from `template`. The
/// clustering seed for each k is `template.seed + k`. Fit failures are
/// recorded per row.
pub fn scan_k_with(
    data: &Array2<f64>,
    template: &ClusterConfig,
    k_range: RangeInclusive<usize>,
) -> Result<ScanReport> {
    let n = data.nrows();
    let (lo, hi) = (*k_range.start(), *k_range.end());
    if lo < 2 || hi < lo || hi + 1 > n {
        return Err(Error::InvalidParameter(format!(
            "k range {lo}..={hi} must lie within 2..={}",
            n.saturating_sub(1)
        )));
    }
    let rows: Vec<ScanRow> = k_range
        .map(|k| {
            let config = ClusterConfig {
                k,
                seed: template.seed.wrapping_add(k as u64),
                ..template.clone()
            };
            let outcome = clustering::fit(data, &config)
                .and_then(|fit| Ok((evaluate(data, &fit.assignment)?, fit.assignment)))
                .map_err(|e| e.to_string());
            if let Err(e) = &outcome {
                log::warn!("{} with k = {k} failed: {e}", template.kind);
            }
            ScanRow { k, outcome }
        })
        .collect();

    let scored: Vec<&QualityReport> = rows.iter().filter_map(ScanRow::report).collect();
    let pick = |better: &dyn Fn(&QualityReport, &QualityReport) -> bool| {
        let mut best: Option<&QualityReport> = None;
        for r in &scored {
            if best.is_none_or(|b| better(r, b)) {
                best = Some(r);
            }
        }
        best.map(|r| r.k)
    };
    Ok(ScanReport {
        kind: template.kind,
        best_by_silhouette: pick(&|a, b| a.silhouette > b.silhouette),
        best_by_calinski_harabasz: pick(&|a, b| a.calinski_harabasz > b.calinski_harabasz),
        best_by_davies_bouldin: pick(&|a, b| a.davies_bouldin < b.davies_bouldin),
        best_k: pick(&|a, b| {
            a.silhouette > b.silhouette
                || (a.silhouette == b.silhouette && a.calinski_harabasz > b.calinski_harabasz)
        }),
        rows,
    })
}
