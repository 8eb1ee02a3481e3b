//! Seeding conventions.
//!
//! Every random stream in the crate is a `ChaCha8Rng`. Child seeds are derived by
//! packing up to four 64-bit words into a ChaCha key and taking its first output,
//! so a derived seed depends only on its inputs, never on evaluation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Domain tags keep streams derived from the same user seed apart.
pub mod tag {
    pub const INSTANCE: u64 = 0x494e_5354;
    pub const RUN: u64 = 0x5255_4e53;
    pub const TOLERANCE: u64 = 0x544f_4c45;
    pub const WHITE_NOISE: u64 = 0x5748_4954;
}

pub fn derive_seed(words: &[u64]) -> u64 {
    assert!(words.len() <= 4, "at most four seed words");
    let mut key = [0u8; 32];
    for (chunk, w) in key.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key).next_u64()
}

pub fn stream(seed: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(seed)
}
