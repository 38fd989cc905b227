//! Deterministic seed fan-out.
//!
//! A single master seed is split into independent per-stage and per-worker
//! streams through a counter-style mix, so results do not depend on thread
//! scheduling or the degree of parallelism.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate. ChaCha streams are reproducible across
/// platforms, unlike `StdRng`.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a child seed from a master seed, a stage label, and a counter.
pub fn derive_seed(master: u64, stage: &str, index: u64) -> u64 {
    let mut s = splitmix64(master ^ fnv1a(stage.as_bytes()));
    s = splitmix64(s ^ index);
    splitmix64(s)
}

/// A fresh RNG for `(master, stage, index)`.
pub fn stage_rng(master: u64, stage: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, stage, index))
}
