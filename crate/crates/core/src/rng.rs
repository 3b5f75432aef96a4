//! Named, reproducible random streams.
//!
//! Every random draw in the stack comes from a [`ChaCha8Rng`] derived from a
//! single user seed, a stream tag and up to two indices (epoch, episode, ...).
//! Streams never depend on scheduling, so parallel rollouts reproduce serial
//! ones bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags. Values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Rollout = 2,
    Update = 3,
    Scenario = 4,
    Estimator = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent generator for `(seed, stream, a, b)`.
pub fn stream_rng(seed: u64, stream: Stream, a: u64, b: u64) -> SimRng {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ stream as u64);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b.rotate_left(32));
    ChaCha8Rng::seed_from_u64(h)
}
