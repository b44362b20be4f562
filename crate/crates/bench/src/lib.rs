//! Shared inputs for the benchmarks.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` rows of four uniform features in `[0, 1)`.
pub fn features(n: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, 4), |_| rng.random::<f64>())
}

/// Smooth nonlinear target over [`features`].
pub fn target(x: &Array2<f64>) -> Array1<f64> {
    x.rows()
        .into_iter()
        .map(|r| (3.0 * r[0]).sin() + r[1] * r[2] - 0.5 * r[3])
        .collect()
}
