mod common;

use hybreg::clustering::ClusterAssignment;
use hybreg::dataset::synthesize;
use hybreg::quality::{calinski_harabasz, davies_bouldin, evaluate, scan_k, silhouette};
use hybreg::{ClusterKind, ScalerParams};
use ndarray::{Array2, Axis};
use proptest::prelude::*;

use common::{blobs, config};

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn rows(x: &Array2<f64>) -> Vec<Vec<f64>> {
    x.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn mean(points: &[&Vec<f64>]) -> Vec<f64> {
    let d = points[0].len();
    (0..d)
        .map(|f| points.iter().map(|p| p[f]).sum::<f64>() / points.len() as f64)
        .collect()
}

fn naive_silhouette(x: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = x.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = labels.iter().filter(|&&l| l == labels[i]).count();
        if own == 1 {
            continue;
        }
        let mut a = 0.0;
        for j in 0..n {
            if j != i && labels[j] == labels[i] {
                a += dist(&x[i], &x[j]);
            }
        }
        a /= (own - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c == labels[i] {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            let m = members.iter().map(|&j| dist(&x[i], &x[j])).sum::<f64>() / members.len() as f64;
            b = b.min(m);
        }
        let s = if a.max(b) > 0.0 {
            (b - a) / a.max(b)
        } else {
            0.0
        };
        total += s;
    }
    total / n as f64
}

fn naive_ch(x: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = x.len();
    let all: Vec<&Vec<f64>> = x.iter().collect();
    let g = mean(&all);
    let (mut bgss, mut wgss) = (0.0, 0.0);
    for c in 0..k {
        let members: Vec<&Vec<f64>> = (0..n).filter(|&i| labels[i] == c).map(|i| &x[i]).collect();
        let gc = mean(&members);
        bgss += members.len() as f64 * dist(&gc, &g).powi(2);
        for m in &members {
            wgss += dist(m, &gc).powi(2);
        }
    }
    (n - k) as f64 / (k - 1) as f64 * bgss / wgss
}

fn naive_db(x: &[Vec<f64>], labels: &[usize], k: usize) -> f64 {
    let n = x.len();
    let mut centers = Vec::new();
    let mut spreads = Vec::new();
    for c in 0..k {
        let members: Vec<&Vec<f64>> = (0..n).filter(|&i| labels[i] == c).map(|i| &x[i]).collect();
        let gc = mean(&members);
        spreads.push(members.iter().map(|m| dist(m, &gc)).sum::<f64>() / members.len() as f64);
        centers.push(gc);
    }
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for b in 0..k {
            if a != b {
                worst = worst.max((spreads[a] + spreads[b]) / dist(&centers[a], &centers[b]));
            }
        }
        total += worst;
    }
    total / k as f64
}

/// Random data plus a labeling that uses every one of `k` labels.
fn labeled(max_n: usize) -> impl Strategy<Value = (Array2<f64>, Vec<usize>, usize)> {
    (2usize..=4).prop_flat_map(move |k| {
        (k + 2..=max_n).prop_flat_map(move |n| {
            (
                prop::collection::vec(-3.0f64..3.0, n * 4),
                prop::collection::vec(0..k, n - k),
            )
                .prop_map(move |(v, tail)| {
                    let mut labels: Vec<usize> = (0..k).collect();
                    labels.extend(tail);
                    (Array2::from_shape_vec((n, 4), v).unwrap(), labels, k)
                })
        })
    })
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn indices_match_naive_oracles((x, labels, k) in labeled(30)) {
        let a = ClusterAssignment::new(labels.clone(), k).unwrap();
        let r = rows(&x);
        let (s, per) = silhouette(&x, &a).unwrap();
        prop_assert!((s - naive_silhouette(&r, &labels, k)).abs() < 1e-9);
        prop_assert!((s - per.iter().sum::<f64>() / per.len() as f64).abs() < 1e-12);
        prop_assert!(per.iter().all(|v| (-1.0..=1.0).contains(v)));
        let ch = calinski_harabasz(&x, &a).unwrap();
        let want = naive_ch(&r, &labels, k);
        prop_assert!((ch - want).abs() <= 1e-9 * want.max(1.0));
        let db = davies_bouldin(&x, &a).unwrap();
        prop_assert!((db - naive_db(&r, &labels, k)).abs() < 1e-9);
    }

    #[test]
    fn indices_ignore_order_labels_translation_and_scale(
        (x, labels, k) in labeled(20),
        shift in prop::collection::vec(-10.0f64..10.0, 4),
        scale in 0.1f64..10.0,
        rotate in 1usize..4,
    ) {
        let a = ClusterAssignment::new(labels.clone(), k).unwrap();
        let base = evaluate(&x, &a).unwrap();
        let close = |p: f64, q: f64| (p - q).abs() <= 1e-9 * p.abs().max(1.0);

        let n = x.nrows();
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        prop_assume!({
            let mut p = perm.clone();
            p.sort_unstable();
            p == (0..n).collect::<Vec<_>>()
        });
        let xp = x.select(Axis(0), &perm);
        let lp: Vec<usize> = perm.iter().map(|&i| (labels[i] + rotate) % k).collect();
        let r = evaluate(&xp, &ClusterAssignment::new(lp, k).unwrap()).unwrap();
        prop_assert!(close(base.silhouette, r.silhouette));
        prop_assert!(close(base.calinski_harabasz, r.calinski_harabasz));
        prop_assert!(close(base.davies_bouldin, r.davies_bouldin));

        let shifted = &x + &ndarray::Array1::from(shift);
        let r = evaluate(&shifted, &a).unwrap();
        prop_assert!(close(base.silhouette, r.silhouette));
        prop_assert!(close(base.calinski_harabasz, r.calinski_harabasz));
        prop_assert!(close(base.davies_bouldin, r.davies_bouldin));

        let scaled = &x * scale;
        let r = evaluate(&scaled, &a).unwrap();
        prop_assert!(close(base.silhouette, r.silhouette));
        prop_assert!(close(base.calinski_harabasz, r.calinski_harabasz));
        prop_assert!(close(base.davies_bouldin, r.davies_bouldin));
    }
}

#[test]
fn separated_blobs_score_high() {
    // Unit-sigma blobs whose 3-sigma envelopes are 10 sigma apart.
    let (x, labels) = blobs(&[vec![0.0], vec![16.0]], 50, 1.0, 3);
    let (s, _) = silhouette(&x, &ClusterAssignment::new(labels, 2).unwrap()).unwrap();
    assert!(s > 0.9, "{s}");
}

#[test]
fn scan_finds_planted_regimes() {
    let synth = synthesize(1000, 11).unwrap();
    let x = ScalerParams::fit(synth.dataset.features())
        .unwrap()
        .transform(synth.dataset.features())
        .unwrap();
    let scan = scan_k(&x, ClusterKind::KMeans, 2..=7, 11).unwrap();
    assert_eq!(scan.best_k, Some(4));
    assert_eq!(scan.best_by_silhouette, Some(4));
    assert_eq!(scan.best_by_calinski_harabasz, Some(4));
    assert_eq!(scan.best_by_davies_bouldin, Some(4));
    assert_eq!(scan.rows.len(), 6);
}
