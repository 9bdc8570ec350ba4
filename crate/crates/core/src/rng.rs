//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream selected by
//! `(seed, purpose, index)`, so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Stream purposes. Distinct values keep unrelated draws independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    MatrixRow = 1,
    Support = 2,
    Replace = 3,
    RowZeroing = 4,
    StateEvolution = 5,
    Calibration = 6,
    Normalization = 7,
    Solver = 8,
    PolyFit = 9,
    PolyHoldout = 10,
    Experiment = 11,
}

/// Generator for `(seed, purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}

/// Derive a child seed, e.g. one seed per Monte Carlo sample.
pub fn derive_seed(seed: u64, purpose: Purpose, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, purpose, index).next_u64()
}
