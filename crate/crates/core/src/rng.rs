//! Seed-derived random streams.
//!
//! Every parallel task draws from its own ChaCha stream keyed by
//! `(seed, task id)`, so results do not depend on how tasks are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Finalizer from splitmix64.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Combines a list of task coordinates into one stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243f_6a88_85a3_08d3, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Independent generator for the task identified by `parts`.
pub fn task_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(parts));
    rng
}

/// Domain tags so different consumers of one scenario seed never share a stream.
pub mod domain {
    pub const READOUT_NOISE: u64 = 1;
    pub const SPIN_SAMPLES: u64 = 2;
    pub const NV_SAMPLES: u64 = 3;
    pub const BOOTSTRAP: u64 = 4;
    pub const SIGN_MAP: u64 = 5;
}
