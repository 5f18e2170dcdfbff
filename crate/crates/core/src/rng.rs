//! Seeded random number generation.
//!
//! Every generator in the crate draws from [`ChaCha8Rng`], which produces the
//! same stream on every platform for a given 64-bit seed. Independent streams
//! are derived with [`derive_seed`] so parallel trials never share state.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Name recorded in experiment outputs alongside the seed.
pub const GENERATOR_NAME: &str = "ChaCha8Rng";

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Derives a child seed for `(stream, index)` from a parent seed.
pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ splitmix64(stream)).wrapping_add(index))
}
