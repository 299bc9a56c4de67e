//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] seeded through
//! [`SeedableRng::seed_from_u64`]. ChaCha8 output is specified independently
//! of platform and word size, so identical seeds reproduce identical streams
//! everywhere. Sub-streams are derived with a SplitMix64 hash chain over
//! `(master, tag, tag, ...)`, which keeps cells of a Monte Carlo grid
//! independent of which other cells exist.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a sequence of tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(master.wrapping_add(GOLDEN_GAMMA)), |acc, &t| {
        mix64(acc ^ mix64(t.wrapping_add(GOLDEN_GAMMA)))
    })
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
