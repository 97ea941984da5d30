//! Seed derivation for schedule-independent Monte Carlo.
//!
//! Every random stream is keyed by `(master_seed, stream, index)`, so a trial
//! draws the same numbers whether trials run serially or on a pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master_seed: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master_seed) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ index)
}

pub fn stream_rng(master_seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master_seed, stream, index))
}

/// Named stream ids used across the crate and the harness.
pub mod streams {
    pub const PAYLOAD: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const CHANNEL: u64 = 3;
    pub const INTERFERENCE: u64 = 4;
    pub const PHASE_NOISE: u64 = 5;
    pub const ENSEMBLE: u64 = 6;
    pub const SCENARIO: u64 = 7;
}
