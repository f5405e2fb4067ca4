//! Stable seed derivation.
//!
//! Every random stream in the simulator descends from a single master seed.
//! Child seeds are derived with a SplitMix64 finalizer so that the stream for
//! client 3 does not depend on how many draws client 2 made.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Distinct constants keep sibling streams decorrelated.
pub mod tag {
    pub const EIGEN_START: u64 = 0x4549_4745_4e53_5452;
    pub const FED_PLUS_INIT: u64 = 0x4650_4c55_5349_4e49;
    pub const PARTITION: u64 = 0x5041_5254_4954_494f;
    pub const ALGORITHM: u64 = 0x414c_474f_5249_5448;
    pub const CLIENT: u64 = 0x434c_4945_4e54_5f5f;
    pub const TRIAL: u64 = 0x5452_4941_4c5f_5f5f;
    pub const REFERENCE: u64 = 0x5245_4645_5245_4e43;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a `(tag, index)` pair.
pub fn derive_seed(parent: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ splitmix64(tag)).wrapping_add(index))
}

/// Seed for a client's private stream: `hash(master_seed, client_id)`.
pub fn client_seed(master: u64, client_id: usize) -> u64 {
    derive_seed(master, tag::CLIENT, client_id as u64)
}

/// Seed for trial `index` of an experiment: `hash(master_seed, trial_index)`.
pub fn trial_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, tag::TRIAL, index as u64)
}

/// FNV-1a over bytes; used to key reference seeds by dataset name.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
