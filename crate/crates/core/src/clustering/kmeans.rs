use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{nearest_centroid, ClusterAssignment, ClusterFit, ClusterKind, ClusterModel};
use crate::error::{Error, Result};
use crate::linalg::{row, squared_distance};

pub const KMEANS_RESTARTS: usize = 10;

/// Lloyd's algorithm from k-means++ seeding, best of [`KMEANS_RESTARTS`]
/// restarts by inertia.
///
/// A run stops when the total centroid displacement drops below `tol` or
/// after `max_iter` iterations. The returned trace holds the inertia after
/// every assignment step of the winning run.
pub fn kmeans(
    data: &Array2<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterFit> {
    kmeans_with_restarts(data, k, seed, max_iter, tol, KMEANS_RESTARTS)
}

pub fn kmeans_with_restarts(
    data: &Array2<f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    n_init: usize,
) -> Result<ClusterFit> {
    let n = data.nrows();
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} exceeds the {n} samples"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let data = data.as_standard_layout().into_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<Run> = None;
    let mut last_err = None;
    for _ in 0..n_init.max(1) {
        let init = plus_plus(&data, k, &mut rng);
        match lloyd(&data, init, max_iter, tol) {
            Ok(run) => {
                if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
                    best = Some(run);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let run = match best {
        Some(run) => run,
        None => return Err(last_err.expect("at least one restart ran")),
    };
    let assignment = ClusterAssignment::new(run.labels, k)?;
    let model = ClusterModel {
        kind: ClusterKind::KMeans,
        k,
        centroids: run.centroids,
        gmm: None,
        seed,
    };
    Ok(ClusterFit {
        model,
        assignment,
        trace: run.history,
    })
}

/// Sum of squared distances from every row to the centroid of its cluster.
pub fn inertia(data: &Array2<f64>, centroids: &Array2<f64>, labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let x = data.row(i);
            let c = centroids.row(l);
            x.iter()
                .zip(c.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum()
}

struct Run {
    labels: Vec<usize>,
    centroids: Array2<f64>,
    inertia: f64,
    history: Vec<f64>,
}

fn plus_plus(data: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut centroids = Array2::zeros((k, data.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&data.row(first));
    let mut dist: Vec<f64> = (0..n)
        .map(|i| squared_distance(row(data, i), row(data, first)))
        .collect();
    let mut chosen = vec![first];
    for c in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in dist.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total weight")
        } else {
            // All remaining points coincide with chosen centers.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(pick);
        centroids.row_mut(c).assign(&data.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(squared_distance(row(data, i), row(data, pick)));
        }
    }
    centroids
}

fn assign(
    data: &Array2<f64>,
    centroids: &Array2<f64>,
    labels: &mut [usize],
    dist: &mut [f64],
) -> f64 {
    let mut total = 0.0;
    for i in 0..data.nrows() {
        let (j, d) = nearest_centroid(centroids, row(data, i));
        labels[i] = j;
        dist[i] = d;
        total += d;
    }
    total
}

fn lloyd(data: &Array2<f64>, mut centroids: Array2<f64>, max_iter: usize, tol: f64) -> Result<Run> {
    let (n, d) = data.dim();
    let k = centroids.nrows();
    let mut labels = vec![0usize; n];
    let mut dist = vec![0.0; n];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        let total = assign(data, &centroids, &mut labels, &mut dist);
        history.push(total);

        let mut sums = Array2::<f64>::zeros((k, d));
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(row(data, i)) {
                *s += v;
            }
        }
        relocate_empty(data, &mut labels, &mut dist, &mut sums, &mut counts);

        let mut shift = 0.0;
        for j in 0..k {
            if counts[j] == 0 {
                continue;
            }
            for c in 0..d {
                let new = sums[[j, c]] / counts[j] as f64;
                shift += (new - centroids[[j, c]]).powi(2);
                centroids[[j, c]] = new;
            }
        }
        if shift.sqrt() < tol {
            break;
        }
    }

    let total = assign(data, &centroids, &mut labels, &mut dist);
    history.push(total);
    // Report the centroids that match the final labels exactly.
    let mut counts = vec![0usize; k];
    let mut sums = Array2::<f64>::zeros((k, d));
    for i in 0..n {
        counts[labels[i]] += 1;
        for (s, v) in sums.row_mut(labels[i]).iter_mut().zip(row(data, i)) {
            *s += v;
        }
    }
    let found = counts.iter().filter(|&&c| c > 0).count();
    if found != k {
        return Err(Error::EmptyCluster { expected: k, found });
    }
    for j in 0..k {
        for c in 0..d {
            centroids[[j, c]] = sums[[j, c]] / counts[j] as f64;
        }
    }
    let inertia = inertia(data, &centroids, &labels);
    Ok(Run {
        labels,
        centroids,
        inertia,
        history,
    })
}

/// Moves every empty cluster onto the point currently farthest from its
/// centroid, taken from a cluster with more than one member.
fn relocate_empty(
    data: &Array2<f64>,
    labels: &mut [usize],
    dist: &mut [f64],
    sums: &mut Array2<f64>,
    counts: &mut [usize],
) {
    for j in 0..counts.len() {
        if counts[j] > 0 {
            continue;
        }
        let mut far: Option<usize> = None;
        for i in 0..labels.len() {
            if counts[labels[i]] > 1 && far.is_none_or(|f| dist[i] > dist[f]) {
                far = Some(i);
            }
        }
        let Some(i) = far else { return };
        let old = labels[i];
        counts[old] -= 1;
        counts[j] = 1;
        for (c, v) in row(data, i).iter().enumerate() {
            sums[[old, c]] -= v;
            sums[[j, c]] = *v;
        }
        labels[i] = j;
        dist[i] = 0.0;
    }
}
