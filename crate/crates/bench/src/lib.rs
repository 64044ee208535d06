//! Shared fixtures for the benchmarks.

use rpca_core::{generate_synthetic, Corruption, Matrix, SeededRng, SyntheticInstance, SyntheticSpec};

/// Square rank-`rank` instance with 5% entrywise corruption in `±[1, 10]`.
pub fn corrupted_low_rank(n: usize, rank: usize, seed: u64) -> SyntheticInstance {
    let spec = SyntheticSpec {
        m: n,
        n,
        rank,
        sparsity: 0.05,
        magnitude_low: 1.0,
        magnitude_high: 10.0,
        corruption: Corruption::Entrywise,
    };
    generate_synthetic(&spec, seed).expect("fixture spec is valid")
}

pub fn gaussian(m: usize, n: usize, seed: u64) -> Matrix {
    let mut rng = SeededRng::new(seed);
    Matrix::from_fn(m, n, |_, _| rng.normal())
}
