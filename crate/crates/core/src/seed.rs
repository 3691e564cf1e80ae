//! Deterministic seeding of per-replica random-number streams.
//!
//! Replica `i` of an experiment with master seed `s` always uses the stream
//! seeded by `splitmix64(s + (i + 1) * GOLDEN_GAMMA)` (wrapping arithmetic).
//! The stream is therefore a pure function of `(s, i)`: growing the replica
//! count leaves earlier replicas' output untouched, and replicas can run on
//! any number of worker threads without affecting results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Weyl increment used by the splitmix64 generator.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One output step of the splitmix64 mixing function.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 64-bit seed for replica `replica` under `master_seed`.
pub fn replica_seed(master_seed: u64, replica: u64) -> u64 {
    splitmix64(master_seed.wrapping_add(replica.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Independent generator for one replica.
pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(replica_seed(master_seed, replica))
}

/// Generator seeded directly from a 64-bit value (single-run entry points).
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn replica_streams_are_stable_and_distinct() {
        let mut a = replica_rng(42, 0);
        let mut b = replica_rng(42, 0);
        let mut c = replica_rng(42, 1);
        let xs: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.random()).collect();
        let zs: Vec<u64> = (0..8).map(|_| c.random()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference sequence for state 0 from the canonical splitmix64.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(GOLDEN_GAMMA), 0x6E78_9E6A_A1B9_65F4);
    }
}
