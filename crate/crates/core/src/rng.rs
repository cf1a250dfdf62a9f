//! Seeding. Every random stream in the crate is a `ChaCha8Rng` seeded from a
//! 64-bit value; sub-streams are derived with a SplitMix64 finalizer so the
//! derivation is stable across platforms and independent of thread layout.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a sequence of tags.
pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(parent), |acc, &t| mix64(acc ^ mix64(t)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Tags for the independent streams used inside one repetition.
pub mod stream {
    pub const PILOT: u64 = 0x5049_4c4f_54;
    pub const SAMPLE: u64 = 1;
    pub const PSCORE_FOLDS: u64 = 2;
    pub const OUTCOME_TREATED_FOLDS: u64 = 3;
    pub const OUTCOME_CONTROL_FOLDS: u64 = 4;
    pub const SELECTION_FOLDS: u64 = 5;
    pub const REFOLD: u64 = 6;
}
