//! Seed derivation and counter-based uniform draws.
//!
//! Every random quantity in the crate is a pure function of a 64-bit base
//! seed and a position, so results never depend on scheduling or thread
//! count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for stream `index` of `base`.
#[inline]
pub fn derive_seed(base: u64, index: u64) -> u64 {
    mix64(mix64(base ^ GOLDEN).wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform draw in `[0, 1)` at position `counter` of the stream keyed by `key`.
#[inline]
pub fn counter_uniform(key: u64, counter: u64) -> f64 {
    let bits = mix64(key ^ mix64(counter.wrapping_add(1).wrapping_mul(GOLDEN)));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A sequential generator for the places that need one (sampling, exploration).
pub fn stream(base: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, index))
}
