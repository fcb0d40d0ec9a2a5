// SPDX-License-Identifier: Apache-2.0

//! Seeded random streams.
//!
//! Every Monte-Carlo routine derives its generators from a `(seed, stream)`
//! pair so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Generator type used throughout the crate.
pub type StreamRng = ChaCha20Rng;

/// Returns the generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Number of independent streams a Monte-Carlo job of `n` draws is split into.
pub(crate) const MC_STREAMS: u64 = 16;

/// Splits `n` draws across [`MC_STREAMS`] streams as `(stream id, count)`
/// pairs, in stream order.
pub(crate) fn stream_chunks(n: usize) -> Vec<(u64, usize)> {
    let streams = MC_STREAMS as usize;
    let base = n / streams;
    let extra = n % streams;
    (0..streams)
        .map(|i| (i as u64, base + usize::from(i < extra)))
        .collect()
}

/// Seed for an independent sub-experiment `tag` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    seed ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}
