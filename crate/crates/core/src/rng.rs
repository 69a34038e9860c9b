//! Seed derivation for every random draw in the crate.
//!
//! All generators are `XorShiftRng` (Marsaglia xorshift128). A generator is
//! never shared between logical streams: each stream gets its own sub-seed
//! derived from the run seed and a textual stream key, e.g.
//! `"sample/Young"` or `"synth/Older/17/silver"`. Derivation is
//! `splitmix64(seed ^ fnv1a64(key))`, so the order in which streams are
//! created never influences their contents.

use rand::SeedableRng;
use rand_xorshift::XorShiftRng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a hash of `key`.
pub fn fnv1a64(key: &str) -> u64 {
    key.bytes().fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// One round of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for the stream named `key` under run seed `seed`.
pub fn derive_seed(seed: u64, key: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(key))
}

/// Fresh generator for the stream named `key`.
pub fn stream(seed: u64, key: &str) -> XorShiftRng {
    XorShiftRng::seed_from_u64(derive_seed(seed, key))
}
