//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value derived from a master seed and a path of integer tags, so the
//! output of any stage is independent of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream tags used by the active-learning loop.
pub mod tag {
    pub const INITIAL: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const PERTURB: u64 = 3;
    pub const GAMMA: u64 = 4;
    pub const BASELINE: u64 = 5;
    pub const EVAL: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `master` and an ordered list of tags.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc ^ splitmix64(t.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
