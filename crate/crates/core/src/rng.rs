//! Seed derivation and the per-index noise field.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::multiindex::MultiIndex;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the `stream`-th independent task derived from `base`.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

/// Stable 64-bit hash of a multi-index.
pub fn index_key(j: &MultiIndex) -> u64 {
    let mut h = mix64(j.dim() as u64);
    for &e in j.entries() {
        h = mix64(h ^ (e as i64 as u64));
    }
    h
}

pub fn chacha(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Source of the standardized noise `ξ_j`.
pub trait NoiseField: Sync {
    fn xi(&self, j: &MultiIndex) -> f64;
}

/// Counter-based Gaussian field: `ξ_j` depends only on `(seed, j)`, so two
/// observation boxes drawn with the same seed agree on their overlap.
#[derive(Debug, Clone, Copy)]
pub struct GaussianField {
    pub seed: u64,
}

impl NoiseField for GaussianField {
    fn xi(&self, j: &MultiIndex) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index_key(j));
        StandardNormal.sample(&mut rng)
    }
}

/// `ξ ≡ 0`.
#[derive(Debug, Clone, Copy)]
pub struct ZeroField;

impl NoiseField for ZeroField {
    fn xi(&self, _: &MultiIndex) -> f64 {
        0.0
    }
}
