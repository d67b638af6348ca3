//! Seed derivation. Every random stream in a campaign is derived from the
//! single campaign seed and a purpose tag; there is no global RNG.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const TAG_INITIAL_DESIGN: u64 = 0x1d1e_5a11_0000_0001;
pub const TAG_SURROGATE: u64 = 0x5e11_0a7e_0000_0002;
pub const TAG_ACQUISITION: u64 = 0xacc0_1517_0000_0003;
pub const TAG_FALLBACK_DESIGN: u64 = 0xfa11_bacc_0000_0004;
pub const TAG_RANDOM_SEARCH: u64 = 0x7a4d_0500_0000_0005;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// `seed ⊕ tag`, then scrambled with the iteration/stream index.
pub fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    mix((seed ^ tag).wrapping_add(mix(index)))
}

pub fn rng_from(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
