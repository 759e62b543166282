//! Seed derivation for independent random streams.
//!
//! Every random stream in the crate (a shard's fading process, a random
//! grouping draw, a mean-gain draw) gets its seed from a base seed plus a
//! list of integer tags. Tags identify *what* the stream is for, never the
//! position of a work item in a queue, so reordering or parallelising work
//! leaves every stream untouched.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `tags` into `base`, one SplitMix64 step per tag.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(base.wrapping_add(GOLDEN_GAMMA)), |acc, &t| mix64(acc ^ mix64(t.wrapping_add(GOLDEN_GAMMA))))
}
