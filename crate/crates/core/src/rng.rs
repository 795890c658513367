//! Seeded random streams and labeled child-seed derivation.
//!
//! Every random decision in the crate is drawn from a [`Stream`] built from a
//! `u64` seed. Work that may run in parallel gets its own stream whose seed is
//! derived from the parent seed plus a label or index path, so the schedule
//! never changes the numbers drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and an index path.
pub fn child_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(parent), |acc, &p| mix(acc ^ mix(p)))
}

/// Derives a child seed from `parent` and a text label.
pub fn labeled_seed(parent: u64, label: &str) -> u64 {
    // FNV-1a over the label, then mixed with the parent.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    child_seed(parent, &[h])
}
