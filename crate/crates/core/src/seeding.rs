//! Deterministic seeding.
//!
//! Every randomized operation takes an explicit [`RngSeed`]. The same seed and
//! the same call sequence produce the same stream, across runs and across
//! thread counts. Replications derive their seeds as `base + replication_index`
//! (see the harness); independent sub-streams are derived with [`RngSeed::derive`].

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A 64-bit seed for a deterministic random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Builds the generator for this seed.
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Seed for replication `index`: `base + index`, wrapping.
    pub fn offset(self, index: u64) -> RngSeed {
        RngSeed(self.0.wrapping_add(index))
    }

    /// Derives a decorrelated seed for an independent sub-stream.
    ///
    /// SplitMix64 finalizer over `seed XOR stream*phi`; distinct streams give
    /// unrelated seeds even when the base seeds are consecutive integers.
    pub fn derive(self, stream: u64) -> RngSeed {
        RngSeed(splitmix64(
            self.0 ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15),
        ))
    }
}

impl From<u64> for RngSeed {
    fn from(seed: u64) -> Self {
        RngSeed(seed)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
