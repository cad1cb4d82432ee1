//! Seeded randomness.
//!
//! Every stochastic routine takes an explicit `u64` seed and builds its own
//! [`ChaCha8Rng`], so results are reproducible across platforms and
//! independent of call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{c64, CMatrix};

pub type QstRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> QstRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into a seed. Each word passes through a full
/// SplitMix64 round, so changing any component decorrelates the result.
pub fn mix_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Standard complex normal: real and imaginary parts are N(0, 1/2).
pub fn complex_normal(rng: &mut QstRng) -> c64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix(rows: usize, cols: usize, rng: &mut QstRng) -> CMatrix {
    // Row-major fill so the draw order does not depend on storage layout.
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m[(r, c)] = complex_normal(rng);
        }
    }
    m
}

pub fn normal(rng: &mut QstRng) -> f64 {
    StandardNormal.sample(rng)
}
