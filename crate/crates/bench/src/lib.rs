//! Fixtures shared by the benchmarks.

use sepcore::generators::{covariance_of, Distribution};
use sepcore::{Shape, SymMatrix};

/// Gaussian sample covariance of `n` draws at `shape`, seeded.
pub fn sample_covariance(shape: Shape, n: usize, seed: u64) -> SymMatrix {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = nalgebra::DMatrix::zeros(n, shape.p());
    Distribution::Gaussian
        .fill(x.as_mut_slice(), &mut rng)
        .expect("gaussian parameters are valid");
    covariance_of(x, false).expect("finite data")
}

/// `(p1, p2, n)` settings used across the benchmarks.
pub const SETTINGS: [(usize, usize, usize); 3] = [(6, 6, 144), (8, 8, 256), (20, 20, 1600)];
