//! Seeded random substreams.
//!
//! Every stochastic stage draws from its own ChaCha stream keyed by
//! `(seed, path...)`, so replicates give identical results whether they run
//! serially or on a thread pool.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stage tags used when deriving substreams.
pub mod tag {
    pub const NETWORK: u64 = 1;
    pub const EXTRACT: u64 = 2;
    pub const VACCINATE: u64 = 3;
    pub const EPIDEMIC: u64 = 4;
    pub const GROUP_SIZES: u64 = 5;
    pub const BOOTSTRAP: u64 = 6;
    pub const DIAGNOSTIC: u64 = 7;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a base seed with a path of indices into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// A random stream for the given seed and substream path.
pub fn substream(seed: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(seed, path))
}
