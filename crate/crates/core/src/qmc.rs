//! Deterministic sampling: Halton points and per-index random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv = 1.0 / b as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// The `i`-th Halton point in `[0,1)^dim`; `dim` is capped at 16.
pub fn halton(i: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "halton dimension {dim} exceeds 16");
    PRIMES[..dim].iter().map(|&b| radical_inverse(i + 1, b)).collect()
}

/// Independent random stream for work item `index` under `seed`, so parallel
/// sweeps give the same numbers regardless of scheduling.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
