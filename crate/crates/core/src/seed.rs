//! Deterministic seed splitting.
//!
//! Every random stream in an experiment is derived from the user seed by
//! [`derive`], so a trial's draws depend only on `(seed, trial, stream)` and
//! never on scheduling order. The rule is
//!
//! ```text
//! derive(seed, trial, stream) = splitmix64(seed ^ splitmix64(2 * trial + stream))
//! ```
//!
//! with `stream` 0 for hyperparameters and 1 for return noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const HYPER_STREAM: u64 = 0;
pub const NOISE_STREAM: u64 = 1;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(seed: u64, trial: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial.wrapping_mul(2).wrapping_add(stream)))
}

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
