//! Reproducible random streams.
//!
//! Every run is driven by a ChaCha8 stream (a counter-based generator) keyed
//! by a 64-bit per-run seed. Per-run seeds come from a master seed through the
//! SplitMix64 sequence: run `i` gets the `(i + 1)`-th output of SplitMix64
//! started at the master seed. Auxiliary streams (e.g. an independent oracle
//! stream) are derived the same way from a run seed and a stream tag.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Independent sub-stream seed, e.g. for circuit generation vs. verifier coins.
pub fn substream(seed: u64, tag: u64) -> u64 {
    derive_seed(mix64(seed ^ 0xA5A5_A5A5_5A5A_5A5A), tag)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
