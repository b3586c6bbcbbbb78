//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`SeededRng`], which is
//! ChaCha8 (the `rand_chacha` stream cipher RNG, 8 rounds) seeded from a
//! `u64` via `SeedableRng::seed_from_u64`. ChaCha output is specified
//! independently of platform and word size, so a seed reproduces the same
//! stream everywhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a sub-task (e.g. one epoch's shuffle).
pub fn derive(seed: u64, stream: u64) -> SeededRng {
    // splitmix-style scramble so adjacent streams do not share seeds
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    ChaCha8Rng::seed_from_u64(z ^ (z >> 31))
}
