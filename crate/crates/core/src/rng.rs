//! Seeding conventions.
//!
//! Every random stream in the crate is a ChaCha8 generator, which produces
//! the same output on every platform. A batch of runs derives one seed per
//! run from the master seed with [`run_seed`], so any single run can be
//! replayed on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output step for state `z`.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run` in a batch: the `run`-th SplitMix64 output of the
/// master seed, i.e. `splitmix64(master + run·γ)` with γ = 0x9E3779B97F4A7C15.
pub fn run_seed(master: u64, run: usize) -> u64 {
    splitmix64(master.wrapping_add((run as u64).wrapping_mul(GOLDEN_GAMMA)))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
