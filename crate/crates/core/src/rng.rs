//! Seed derivation. Every random draw in a run flows from one base seed.
//!
//! Streams are keyed by `(seed, tag, index)` through SplitMix64 finalizers:
//!
//! ```text
//! derive_seed(seed, tag, index) = mix(mix(seed ^ mix(tag)) ^ mix(index + 1))
//! mix(z) = splitmix64 finalizer of z + 0x9E3779B97F4A7C15
//! ```
//!
//! and each stream drives a `ChaCha8Rng`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Human-readable statement of the splitting rule, written into outputs.
pub const SEED_RULE: &str = "interval_seed = derive_seed(base_seed, 0x494E54, index); \
derive_seed(s, t, i) = mix(mix(s ^ mix(t)) ^ mix(i + 1)); \
mix = SplitMix64 (z += 0x9E3779B97F4A7C15; z = (z ^ z>>30) * 0xBF58476D1CE4E5B9; \
z = (z ^ z>>27) * 0x94D049BB133111EB; z ^ z>>31); streams use ChaCha8";

pub mod tag {
    pub const INTERVAL: u64 = 0x49_4E_54; // "INT"
    pub const OCCASION: u64 = 0x4F_43_43; // "OCC"
    pub const JAMMER: u64 = 0x4A_41_4D; // "JAM"
    pub const CHANNEL: u64 = 0x43_48_4E; // "CHN"
    pub const UE: u64 = 0x55_45; // "UE"
    pub const VALIDITY: u64 = 0x56_41_4C; // "VAL"
    pub const TRIAL: u64 = 0x54_52_49; // "TRI"
}

#[inline]
pub fn mix(z: u64) -> u64 {
    let mut z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(tag)) ^ mix(index.wrapping_add(1)))
}

pub fn stream(seed: u64, tag: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, tag, index))
}

pub fn interval_seed(base_seed: u64, index: u64) -> u64 {
    derive_seed(base_seed, tag::INTERVAL, index)
}
