//! Bottom-up hierarchical clustering with the nearest-neighbor chain
//! algorithm and Lance-Williams distance updates.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ClusterAssignment, ClusterFit, ClusterKind, ClusterModel};
use crate::error::{Error, Result};
use crate::linalg::{distance, row, squared_distance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Linkage {
    #[default]
    Ward,
    Complete,
    Average,
    Single,
}

impl fmt::Display for Linkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Linkage::Ward => "ward",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Single => "single",
        })
    }
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ward" => Ok(Linkage::Ward),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "single" => Ok(Linkage::Single),
            other => Err(Error::InvalidParameter(format!(
                "unknown linkage `{other}`"
            ))),
        }
    }
}

/// One merge of the hierarchy. `a` and `b` are sample indices that belong
/// to the two merged clusters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    /// Linkage distance (squared Euclidean increase for ward).
    pub height: f64,
}

/// Full merge history, sorted by height.
#[derive(Debug, Clone, PartialEq)]
pub struct Dendrogram {
    n: usize,
    merges: Vec<Merge>,
}

/// Condensed upper-triangular distance storage.
struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.n * i - i * (i + 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.index(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let idx = self.index(i, j);
        self.d[idx] = v;
    }
}

impl Dendrogram {
    pub fn build(data: &Array2<f64>, linkage: Linkage) -> Result<Self> {
        let n = data.nrows();
        if n == 0 {
            return Err(Error::EmptyDataset);
        }
        let data = data.as_standard_layout().into_owned();
        let mut dist = Condensed {
            n,
            d: Vec::with_capacity(n * (n - 1) / 2),
        };
        for i in 0..n {
            for j in i + 1..n {
                dist.d.push(match linkage {
                    Linkage::Ward => squared_distance(row(&data, i), row(&data, j)),
                    _ => distance(row(&data, i), row(&data, j)),
                });
            }
        }

        let mut size = vec![1usize; n];
        let mut active = vec![true; n];
        let mut merges = Vec::with_capacity(n.saturating_sub(1));
        let mut chain: Vec<usize> = Vec::new();

        while merges.len() + 1 < n {
            if chain.is_empty() {
                chain.push(
                    active
                        .iter()
                        .position(|&a| a)
                        .expect("an active cluster remains"),
                );
            }
            let (a, b, height) = loop {
                let a = *chain.last().expect("chain is non-empty");
                let prev = chain.len().checked_sub(2).map(|i| chain[i]);
                // Prefer the predecessor on ties so the chain terminates.
                let (mut b, mut best) = match prev {
                    Some(p) => (p, dist.get(a, p)),
                    None => (usize::MAX, f64::INFINITY),
                };
                for c in 0..n {
                    if c != a && active[c] {
                        let d = dist.get(a, c);
                        if d < best {
                            best = d;
                            b = c;
                        }
                    }
                }
                if Some(b) == prev {
                    chain.truncate(chain.len() - 2);
                    break (a.min(b), a.max(b), best);
                }
                chain.push(b);
            };

            merges.push(Merge { a, b, height });
            // The merged cluster lives on in slot `a`.
            let (na, nb) = (size[a] as f64, size[b] as f64);
            let dab = dist.get(a, b);
            for c in 0..n {
                if c == a || c == b || !active[c] {
                    continue;
                }
                let (dac, dbc) = (dist.get(a, c), dist.get(b, c));
                let nc = size[c] as f64;
                let updated = match linkage {
                    Linkage::Single => dac.min(dbc),
                    Linkage::Complete => dac.max(dbc),
                    Linkage::Average => (na * dac + nb * dbc) / (na + nb),
                    Linkage::Ward => {
                        ((na + nc) * dac + (nb + nc) * dbc - nc * dab) / (na + nb + nc)
                    }
                };
                dist.set(a, c, updated);
            }
            active[b] = false;
            size[a] += size[b];
        }

        merges.sort_by(|x, y| x.height.total_cmp(&y.height));
        Ok(Self { n, merges })
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    /// Flat clustering with `k` clusters: the first `n - k` merges. Labels
    /// are numbered by the lowest sample index in each cluster.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.n {
            return Err(Error::InvalidParameter(format!(
                "k = {k} must lie in 1..={} for agglomerative clustering",
                self.n
            )));
        }
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        // The merges form a spanning tree, so every union joins two
        // distinct components whatever the order.
        for m in &self.merges[..self.n - k] {
            let (ra, rb) = (find(&mut parent, m.a), find(&mut parent, m.b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        let mut ids = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut labels = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let r = find(&mut parent, i);
            if ids[r] == usize::MAX {
                ids[r] = next;
                next += 1;
            }
            labels.push(ids[r]);
        }
        Ok(labels)
    }
}

/// Merges singletons pairwise under `linkage` until `k` clusters remain.
pub fn agglomerative(data: &Array2<f64>, k: usize, linkage: Linkage) -> Result<ClusterFit> {
    let n = data.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in 1..={n} for agglomerative clustering"
        )));
    }
    let labels = Dendrogram::build(data, linkage)?.cut(k)?;
    let assignment = ClusterAssignment::new(labels, k)?;
    let model = ClusterModel::from_assignment(ClusterKind::Agglomerative, data, &assignment, 0);
    Ok(ClusterFit {
        model,
        assignment,
        trace: Vec::new(),
    })
}
