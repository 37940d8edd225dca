//! Seeding discipline.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded from an explicit
//! `u64`. Sub-streams are derived with SplitMix64 so parallel callers can partition the
//! seed space without sharing a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator name recorded in artifact metadata.
pub const GENERATOR_NAME: &str = "chacha8/splitmix64-derivation";

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from a parent seed and a list of stream indices.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(parent), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// Fisher–Yates shuffle driven by the crate generator.
pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    use rand::Rng as _;
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
