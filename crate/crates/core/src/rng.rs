//! Deterministic seeding helpers.
//!
//! Every randomized operation in this crate takes an explicit `u64` seed and
//! must produce identical output for identical seeds, independent of thread
//! count. Parallel batch work therefore derives one independent stream per
//! item from `(seed, stream)` instead of sharing a mutable generator.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream indices used by the crate's seeded operations. Distinct
/// constants keep independently seeded call sites off each other's
/// streams even when driven by the same base seed.
pub(crate) mod streams {
    pub const SYNTH_MAP: u64 = 0;
    pub const SYNTH_TRAJ: u64 = 1;
    pub const RWP: u64 = 2;
    pub const GM: u64 = 3;
    pub const M_RWP: u64 = 4;
    pub const M_GM: u64 = 5;
    pub const SW_PROJ: u64 = 6;
    pub const NET_INIT: u64 = 7;
    pub const TRAIN: u64 = 8;
    pub const GENERATE: u64 = 9;
}

/// Mix `(seed, stream)` into a single well-spread 64-bit value (splitmix64
/// finalizer over the golden-ratio stride).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for one logical stream of a seeded computation.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}

/// Generator for a computation with a single stream.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derive_seed_spreads_streams() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        // stable across runs
        assert_eq!(a, derive_seed(7, 0));
    }

    #[test]
    fn stream_rngs_are_independent_and_reproducible() {
        let mut r1 = stream_rng(42, 3);
        let mut r2 = stream_rng(42, 3);
        let mut r3 = stream_rng(42, 4);
        let x1: u64 = r1.next_u64();
        assert_eq!(x1, r2.next_u64());
        assert_ne!(x1, r3.next_u64());
    }
}
