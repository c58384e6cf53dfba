//! Keyed random streams.
//!
//! Every random decision in a run draws from a ChaCha stream selected by the
//! run seed and a key naming the decision (token index, or round/node/batch),
//! so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains, kept distinct so keys from different users never collide.
pub mod domain {
    pub const SERIAL_WALK: u64 = 1;
    pub const SEED_LENGTHS: u64 = 2;
    pub const TOKEN_SPLIT: u64 = 3;
    pub const GUESS: u64 = 4;
    pub const SAMPLE_SEEDS: u64 = 5;
    pub const PER_SEED: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a key into a single 64-bit value.
pub fn mix(seed: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Random stream for `key` under run seed `seed`.
pub fn stream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mix(0, key));
    rng
}
