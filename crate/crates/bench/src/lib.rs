//! Synthetic inputs shared by the benchmarks.

use locindex::{NormalizedSample, PairedSample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded uniform values in `[0, 1)`.
pub fn uniform(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random()).collect()
}

/// `n` pairs with a wavy, non-monotone mean inside the unit square.
pub fn wavy_pairs(n: usize, seed: u64) -> PairedSample {
    let x = uniform(n, seed);
    let noise = uniform(n, seed ^ 0xABCD);
    let y = x
        .iter()
        .zip(&noise)
        .map(|(v, e)| (0.5 + 0.3 * (6.0 * v).sin() + 0.2 * (e - 0.5)).clamp(0.0, 1.0))
        .collect();
    PairedSample::new(x, y).expect("valid synthetic sample")
}

/// Three loosely related columns shaped like a class's mark sheet.
pub fn mark_columns(n: usize, seed: u64) -> NormalizedSample {
    let base = uniform(n, seed);
    let e1 = uniform(n, seed + 1);
    let e2 = uniform(n, seed + 2);
    let a = base.iter().map(|b| 0.3 + 0.6 * b).collect();
    let b = base
        .iter()
        .zip(&e1)
        .map(|(b, e)| 0.4 + 0.4 * b + 0.2 * e)
        .collect();
    let c = base
        .iter()
        .zip(&e2)
        .map(|(b, e)| 0.45 + 0.2 * (3.0 * b).sin() + 0.3 * e)
        .collect();
    NormalizedSample::new(
        vec!["mathematics".into(), "reading".into(), "spelling".into()],
        vec![a, b, c],
    )
    .expect("valid synthetic columns")
}
