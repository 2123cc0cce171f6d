//! Seeded, portable random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed by a 64-bit seed.
//! A dataset-level seed is split into per-instance seeds by taking the first
//! `u64` of ChaCha8 stream `index` keyed by the parent seed, so instance `k`
//! of a dataset is the same regardless of thread count or generation order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for a single seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed of child stream `index` under `parent`.
pub fn child_seed(parent: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(parent);
    rng.set_stream(index);
    rng.next_u64()
}
