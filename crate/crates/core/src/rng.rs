//! Seeded randomness.
//!
//! Every random stream in the crate is a [`ChaCha8Rng`] seeded from a `u64`.
//! ChaCha8 is a fixed published algorithm with a platform independent
//! output stream, so synthetic data and chains are reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

pub type ChainRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for sub-stream `stream` of `base` (splitmix64 mix).
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws an index from unnormalized log weights.
///
/// Weights are max-shifted before exponentiation and the index is found by
/// inverse CDF over the cumulative sums, using a single uniform draw.
/// Entries equal to `-inf` are never selected. Panics if every entry is
/// `-inf` or the maximum is not finite.
pub fn draw_from_log_weights<T: Scalar, R: Rng + ?Sized>(log_w: &[T], rng: &mut R) -> usize {
    let max = log_w
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    assert!(max.is_finite(), "log weights must have a finite maximum");
    let mut total = T::zero();
    let cum: Vec<T> = log_w
        .iter()
        .map(|&l| {
            total = total + (l - max).exp();
            total
        })
        .collect();
    let u = T::of(rng.random::<f64>()) * total;
    cum.iter().position(|&c| u < c).unwrap_or_else(|| {
        // u rounded up to total: take the last selectable entry
        log_w.iter().rposition(|l| l.is_finite()).unwrap()
    })
}
