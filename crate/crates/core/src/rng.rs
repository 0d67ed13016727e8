//! Seeded random streams.
//!
//! Every random draw descends from one root seed. A stream is addressed by a
//! key path (for instance `[cell_key, replica]`); each key is folded into the
//! root with the SplitMix64 finalizer and the result seeds a `ChaCha8Rng`.
//! Streams therefore depend only on their address, never on the order in which
//! work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a key path into the root seed.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(root), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(root: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(root, path))
}

/// Stable key for a list of real parameters (bit patterns, not values, so
/// `0.8` and `0.80000001` address different streams).
pub fn param_key(values: &[f64]) -> u64 {
    values
        .iter()
        .fold(0x5EED_u64, |acc, v| splitmix64(acc ^ v.to_bits()))
}
