//! Counter-based seed derivation so each trial's randomness depends only on
//! its coordinates in the experiment grid, never on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of counters into a 64-bit seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = 0x6A09_E667_F3BC_C908u64;
    for &p in parts {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

/// Seed shared by all trials of one repeat. Reusing it across noise levels
/// lets per-repeat curves be reassembled from the seed column alone.
pub fn trial_seed(master: u64, repeat: usize) -> u64 {
    derive_seed(&[master, repeat as u64])
}

/// Seed of the label noise applied to one split at one noise level.
pub fn noise_seed(trial_seed: u64, rho_index: usize, stream: u64) -> u64 {
    derive_seed(&[trial_seed, rho_index as u64, stream])
}

pub const TRAIN_STREAM: u64 = 0x7472_6169_6e;
pub const EVAL_STREAM: u64 = 0x6576_616c;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
