//! Counter-based seed derivation.
//!
//! A master seed plus a path of counters (study tag, case index, run index,
//! ...) maps to an independent sub-seed, so adding cases never reshuffles
//! the streams of earlier ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_ESTIMATOR: u64 = 0x4553_5449;
pub const STREAM_TRACKING: u64 = 0x5452_434b;
pub const STREAM_TRUTH: u64 = 0x5452_5554;
pub const STREAM_MEASUREMENT: u64 = 0x4d45_4153;
pub const STREAM_PLANNER: u64 = 0x504c_414e;
pub const STREAM_SCENARIO: u64 = 0x5343_454e;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
