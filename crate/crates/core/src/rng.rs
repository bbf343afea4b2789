//! Seed derivation.
//!
//! Every random stream is identified by `(root, purpose, index)`. The derived
//! seed is `splitmix64(root ^ splitmix64(fnv1a(purpose) ^ index))`, so streams
//! with different purposes or indices are decorrelated while staying fully
//! reproducible from the root seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives the seed of the stream `(root, purpose, index)`.
pub fn derive_seed(root: u64, purpose: &str, index: u64) -> u64 {
    splitmix64(root ^ splitmix64(fnv1a(purpose) ^ index))
}

/// Deterministic generator for the stream `(root, purpose, index)`.
pub fn stream(root: u64, purpose: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(root, purpose, index))
}
