//! Fixtures shared by the benchmarks.

use dirichlet_mc::presets::gauss_const_sigma;
use dirichlet_mc::{sample_extended, sample_triplets, ExtendedSample, TripletSample};

pub const SEED: u64 = 7;

/// `n` triplets from the gauss preset.
pub fn gauss_triplets(n: usize) -> Vec<TripletSample> {
    sample_triplets(&gauss_const_sigma(), SEED, 0, n).expect("gauss preset never fails")
}

/// `n` extended samples from the gauss preset.
pub fn gauss_extended(n: usize) -> Vec<ExtendedSample> {
    sample_extended(&gauss_const_sigma(), SEED, 1, n, None).expect("gauss preset never fails")
}
