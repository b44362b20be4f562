#![allow(dead_code)]

use ndarray::Array2;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn config(cases: u32) -> Config {
    Config {
        cases,
        rng_seed: RngSeed::Fixed(0x5eed),
        failure_persistence: None,
        ..Config::default()
    }
}

pub fn uniform(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.random::<f64>())
}

/// Isotropic Gaussian blobs with unit spread around `centers`, `per` rows
/// each, returned with their generating labels.
pub fn blobs(centers: &[Vec<f64>], per: usize, sigma: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let d = centers[0].len();
    let mut x = Array2::zeros((centers.len() * per, d));
    let mut labels = Vec::with_capacity(centers.len() * per);
    for (j, c) in centers.iter().enumerate() {
        for i in 0..per {
            for f in 0..d {
                x[[j * per + i, f]] = c[f] + noise.sample(&mut rng);
            }
            labels.push(j);
        }
    }
    (x, labels)
}

/// Two interleaved half circles with Gaussian jitter.
pub fn half_moons(per: usize, noise: f64, seed: u64) -> (Array2<f64>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).unwrap();
    let mut x = Array2::zeros((2 * per, 2));
    let mut labels = Vec::with_capacity(2 * per);
    for i in 0..per {
        let t = std::f64::consts::PI * i as f64 / (per - 1) as f64;
        x[[i, 0]] = t.cos() + jitter.sample(&mut rng);
        x[[i, 1]] = t.sin() + jitter.sample(&mut rng);
        labels.push(0);
    }
    for i in 0..per {
        let t = std::f64::consts::PI * i as f64 / (per - 1) as f64;
        x[[per + i, 0]] = 1.0 - t.cos() + jitter.sample(&mut rng);
        x[[per + i, 1]] = 0.5 - t.sin() + jitter.sample(&mut rng);
        labels.push(1);
    }
    (x, labels)
}

/// Sum of squared distances to member means.
pub fn partition_inertia(x: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
    let d = x.ncols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        for f in 0..d {
            sums[l][f] += x[[i, f]];
        }
    }
    let mut total = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        for f in 0..d {
            let m = sums[l][f] / counts[l] as f64;
            total += (x[[i, f]] - m).powi(2);
        }
    }
    total
}

/// Minimum inertia over every split of the rows into two non-empty groups.
pub fn brute_force_two_means(x: &Array2<f64>) -> f64 {
    let n = x.nrows();
    let mut best = f64::INFINITY;
    // Row 0 stays in group 0, so each split is visited once.
    for mask in 1u32..(1 << (n - 1)) {
        let labels: Vec<usize> = (0..n)
            .map(|i| {
                if i == 0 {
                    0
                } else {
                    ((mask >> (i - 1)) & 1) as usize
                }
            })
            .collect();
        best = best.min(partition_inertia(x, &labels, 2));
    }
    best
}
