//! Seed derivation. Every random stream in the crate is keyed by a master
//! seed plus a path of integers, so streams never depend on scheduling or
//! iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Fold `parts` into `seed`. Order-sensitive.
pub fn derive(seed: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, parts))
}

// Domain tags keep streams for different purposes apart.
pub(crate) const TAG_AGENT: u64 = 0x41_4745_4e54;
pub(crate) const TAG_ELASTICITY: u64 = 0x454c_4153;
pub(crate) const TAG_RUN: u64 = 0x52_554e;
