//! Shared input generators for the benchmark targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fairpost::divisions::DivisionTable;

/// Seeded random division table with counts in [0, max_g].
pub fn random_table(seed: u64, m: usize, max_g: u64) -> DivisionTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g: Vec<u64> = (0..1usize << (m + 2))
        .map(|_| rng.gen_range(0..=max_g))
        .collect();
    DivisionTable::from_counts(m, g).expect("valid dimensions")
}
