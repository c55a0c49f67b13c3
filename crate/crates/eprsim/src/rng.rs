//! Deterministic random-stream derivation.
//!
//! One master seed drives a whole experiment. Every consumer (a source, each
//! detector, a fuzzer) gets its own ChaCha stream so that adding draws to one
//! consumer never shifts the values seen by another, and per-point runs of a
//! sweep get decorrelated sub-seeds derived with a splitmix64 finalizer.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the fixed consumers of a run.
pub mod role {
    pub const SOURCE: u64 = 0;
    pub const DETECTOR_A: u64 = 1;
    pub const DETECTOR_B: u64 = 2;
    pub const DARK_A: u64 = 3;
    pub const DARK_B: u64 = 4;
    pub const FUZZ: u64 = 5;
    pub const SECOND_SOURCE: u64 = 6;
}

/// Derives the sub-seed for item `index` of a multi-run experiment.
pub fn sub_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one consumer: seeded by `seed`, placed on stream `role`.
pub fn stream(seed: u64, role: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(role);
    rng
}
