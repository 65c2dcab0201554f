//! Seeded randomness.
//!
//! Every stream is a ChaCha8 generator (a counter-based stream cipher with a
//! portable, platform-independent output sequence). Child streams are keyed
//! by mixing the parent seed with a path of integers through SplitMix64, so a
//! trial's stream depends only on its own key path and never on how many
//! siblings were drawn before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SolverRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `seed` and a key path.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_mul(GOLDEN))))
}

pub fn rng_from_seed(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, path: &[u64]) -> SolverRng {
    rng_from_seed(derive_seed(seed, path))
}
