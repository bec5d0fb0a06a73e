//! Deterministic, named random streams.
//!
//! One master seed plus a list of integer tags (stream kind, pair id,
//! generation, child index, ...) identifies every random decision in a run.
//! Derivation is a pure function, so any consumer — sequential or parallel —
//! reconstructs exactly the same stream without shared RNG state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream kinds. Values are part of the on-disk determinism contract:
/// changing them changes every derived run.
pub const STREAM_INIT: u64 = 1;
pub const STREAM_GA: u64 = 2;
pub const STREAM_EVAL: u64 = 3;
pub const STREAM_POET_CREATE: u64 = 4;
pub const STREAM_TRANSFER_EVAL: u64 = 5;
pub const STREAM_CREATE_EVAL: u64 = 6;
pub const STREAM_TERRAIN: u64 = 7;
pub const STREAM_SUITE: u64 = 8;

/// SplitMix64 finalizer: a cheap, well-mixed u64 -> u64 permutation.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the master seed and tags into one well-mixed seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &t in tags {
        s = splitmix64(s ^ splitmix64(t));
    }
    s
}

/// A fresh RNG for the stream named by `tags`.
pub fn derive_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tags))
}
