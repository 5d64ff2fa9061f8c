//! Counter-based derivation of independent sub-seeds from one run seed.
//!
//! `derive(seed, stream, index)` mixes the three words with SplitMix64, so a
//! sub-seed depends only on its coordinates and never on how many values
//! were drawn from any other stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named random streams. The discriminants are part of the reproducibility
/// contract and must never be renumbered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InitSpace = 1,
    InitTransition = 2,
    KnowledgeShuffle = 3,
    AlignmentShuffle = 4,
    Negatives = 5,
    CrossValidation = 6,
    Split = 7,
    Resample = 8,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, stream: Stream, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ stream as u64) ^ index)
}

pub fn rng(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, stream, index))
}
