//! Deterministic per-item random streams.
//!
//! Every random draw in the toolkit comes from a stream keyed by
//! `(seed, domain, index)`, so results never depend on how work is split
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream domains; distinct constants keep unrelated draws independent.
pub mod domain {
    pub const SENSORS: u64 = 0x5E45_0001;
    pub const RAYS: u64 = 0x5E45_0002;
    pub const NOISE: u64 = 0x5E45_0003;
    pub const SURFACE: u64 = 0x5E45_0004;
    pub const VOLUME: u64 = 0x5E45_0005;
    pub const INSIDE_RETRY: u64 = 0x5E45_0006;
    pub const SURFACE_GT: u64 = 0x5E45_0007;
    pub const SURFACE_PRED: u64 = 0x5E45_0008;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Random stream for item `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain)));
    rng.set_stream(index);
    rng
}

/// Mixes an arbitrary key into a seed (used to derive sub-seeds).
pub fn derive_seed(seed: u64, key: u64) -> u64 {
    splitmix64(seed ^ splitmix64(key.wrapping_add(0xD1B5_4A32_D192_ED03)))
}
