//! Per-trial random streams and perturbation sampling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::zoo::LinearPerturbation;

/// Seed of trial `trial` in a run seeded with `seed` (SplitMix64 finalizer).
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    let mut z = seed ^ (trial as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trial_rng(trial_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed)
}

/// `l x m` matrix of independent `N(0, scale²)` entries, filled row by row.
/// `scale = 0` gives the zero matrix.
pub fn sample_perturbation<R: Rng + ?Sized>(rng: &mut R, l: usize, m: usize, scale: f64) -> LinearPerturbation {
    if scale == 0.0 {
        return LinearPerturbation::zeros(l, m);
    }
    let normal = Normal::new(0.0, scale.abs()).expect("finite scale");
    let entries: Vec<f64> = (0..l * m).map(|_| normal.sample(rng)).collect();
    LinearPerturbation(DMatrix::from_row_slice(l, m, &entries))
}

/// Central point with entries uniform in `[-scale, scale]`.
pub fn sample_central_uniform<R: Rng + ?Sized>(rng: &mut R, l: usize, m: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..l)
        .map(|_| (0..m).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect())
        .collect()
}
