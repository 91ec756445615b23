//! Counter-based random streams.
//!
//! Every random draw in a simulation comes from a ChaCha8 stream whose seed
//! is a pure function of the master seed and a list of tags (SNR index,
//! trial index, purpose). Results therefore do not depend on the order in
//! which trials execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Payload = 1,
    Fading = 2,
    Noise = 3,
    Interleaver = 4,
}

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with tags into a 64-bit key.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(master), |acc, &t| splitmix(acc ^ splitmix(t)))
}

pub fn stream(master: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, tags))
}

/// The generator for one purpose of one trial at one SNR point.
pub fn trial_stream(master: u64, snr_index: usize, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    stream(master, &[snr_index as u64, trial, purpose as u64])
}
