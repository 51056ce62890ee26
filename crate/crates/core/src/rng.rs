//! Per-sample random streams.
//!
//! Every randomized operation derives its generator from `(seed, key)` so the
//! result for one sample never depends on how many other samples were
//! processed before it, or on which worker processed it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Mixes a 64-bit seed with a string key into a new 64-bit seed.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    splitmix64(splitmix64(seed) ^ fnv1a64(key.as_bytes()))
}

pub fn stream(seed: u64, key: &str) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, key))
}
