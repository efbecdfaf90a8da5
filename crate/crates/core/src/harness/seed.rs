//! Deterministic per-trial seeds.
//!
//! Seeds are folded from labelled 64-bit words with the SplitMix64 finalizer,
//! so a trial's randomness depends only on its coordinates in the grid and
//! never on scheduling. The instance seed leaves out the variant, which makes
//! every variant in a cell see the same `(A, v)` draws; the starting-point
//! seed includes it.

use crate::engine::Variant;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const INSTANCE_TAG: u64 = 0x696e_7374_616e_6365;
const START_TAG: u64 = 0x7374_6172_7470_6e74;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive fold of `words` into one seed.
pub fn derive(master: u64, words: &[u64]) -> u64 {
    // The rotation keeps the fold from being symmetric in (accumulator, word).
    words
        .iter()
        .fold(splitmix64(master), |acc, &w| splitmix64(acc.rotate_left(23) ^ splitmix64(w)))
}

fn variant_word(v: Variant) -> u64 {
    match v {
        Variant::RandomStart => 1,
        Variant::PolytopeStart => 2,
    }
}

/// Seed of the `(A, v)` draw for one trial of one SNR cell.
pub fn instance_seed(master: u64, snr_db: f64, trial: usize) -> u64 {
    derive(master, &[INSTANCE_TAG, snr_db.to_bits(), trial as u64])
}

/// Seed of the random starting point for one trial.
pub fn start_seed(master: u64, variant: Variant, snr_db: f64, trial: usize) -> u64 {
    derive(master, &[START_TAG, variant_word(variant), snr_db.to_bits(), trial as u64])
}
