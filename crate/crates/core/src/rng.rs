//! Seed derivation. Every stochastic routine takes a `u64` seed and derives
//! sub-seeds by hashing, so any sub-stream can be regenerated on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream key.
pub fn derive_seed(base: u64, key: u64) -> u64 {
    splitmix(splitmix(base) ^ splitmix(key.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// Derives a child seed from a path of keys.
pub fn derive_path(base: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(base, |s, &k| derive_seed(s, k))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
