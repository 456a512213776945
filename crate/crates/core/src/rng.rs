//! Seeded, counter-addressable randomness.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by
//! `(seed, stream)`. ChaCha is a counter-mode generator, so a stream's output
//! depends only on its key and position and never on thread scheduling or
//! platform. Parallel loops split their index range into fixed-size blocks
//! and give each block its own stream.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of consecutive sample indices that share one stream.
pub const BLOCK: usize = 4096;

/// Generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derive an independent child seed, e.g. one per object or pipeline stage.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    // Stream 0 is left to direct users of `stream`.
    stream(seed, tag.wrapping_add(1) | (1 << 63)).next_u64()
}
