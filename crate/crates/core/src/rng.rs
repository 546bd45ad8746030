//! Seed derivation. Every random stream in the crate is a ChaCha generator
//! keyed by a 64-bit seed mixed from the scenario seed and a stream label, so
//! independent concerns never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a list of words into one seed. Order matters.
pub fn derive(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C909, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Stable 64-bit tag for a stream label.
pub fn label(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn stream(seed: u64, name: &str, index: u64) -> Stream {
    Stream::seed_from_u64(derive(&[seed, label(name), index]))
}

/// Per-round training seed shared by every IDS variant: the same
/// `(seed, epoch, trainer)` triple always yields the same shuffle and
/// dropout masks.
pub fn round_seed(seed: u64, epoch: u64, trainer: u64) -> u64 {
    derive(&[seed, epoch, trainer])
}
