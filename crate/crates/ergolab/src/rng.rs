//! Seeded randomness.
//!
//! All random data comes from SplitMix64 (Steele, Lea, Flood 2014): the state
//! advances by `0x9E3779B97F4A7C15` and each output is the state passed
//! through the `mix64` finalizer with multipliers `0xBF58476D1CE4E5B9` and
//! `0x94D049BB133111EB`.  Uniform floats take the top 53 bits.

use rand::{Rng, SeedableRng};
use rand_xoshiro::SplitMix64;

pub use rand_xoshiro::SplitMix64 as Prng;

pub fn prng(seed: u64) -> Prng {
    SplitMix64::seed_from_u64(seed)
}

/// Independent stream for case `index` of a run seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> Prng {
    let mut base = prng(seed ^ 0xD1B5_4A32_D192_ED03u64.wrapping_mul(index.wrapping_add(1)));
    let s: u64 = base.gen();
    prng(s)
}
