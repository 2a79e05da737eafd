//! Seeded synthetic credit-approval data with demographics and outcome
//! dependence resembling the public German credit statistics. Used by the
//! acceptance suite and benchmarks when the real dataset is not on disk.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tabular::{BinaryDataset, Schema};

/// Columns: protected age35/single/foreign, explanatory chk_acct/
/// credit_hist_good, other duration20, outcome approved. Approval
/// probability is logistic in all six attributes, so protected-group
/// dependence is planted and a classifier trained on the data will pick it
/// up.
pub fn credit_dataset(n_rows: usize, seed: u64) -> BinaryDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let age35 = rng.gen_bool(0.45) as u8;
        let single = rng.gen_bool(0.548) as u8;
        let foreign = rng.gen_bool(0.85) as u8;
        let chk_acct = rng.gen_bool(0.55) as u8;
        let duration20 = rng.gen_bool(0.40) as u8;
        let credit_hist_good = rng.gen_bool(0.53) as u8;
        let z = -0.8 + 1.1 * credit_hist_good as f64 + 0.7 * chk_acct as f64
            - 0.8 * duration20 as f64
            + 0.45 * age35 as f64
            + 0.3 * single as f64
            + 0.35 * foreign as f64;
        let p = 1.0 / (1.0 + (-z).exp());
        let approved = rng.gen_bool(p) as u8;
        rows.push(vec![
            age35,
            single,
            foreign,
            chk_acct,
            duration20,
            credit_hist_good,
            approved,
        ]);
    }
    BinaryDataset::new(
        vec![
            "age35".into(),
            "single".into(),
            "foreign".into(),
            "chk_acct".into(),
            "duration20".into(),
            "credit_hist_good".into(),
            "approved".into(),
        ],
        rows,
        Schema::new(
            "approved",
            &["age35", "single", "foreign"],
            &["chk_acct", "credit_hist_good"],
            &["duration20"],
        ),
    )
    .expect("generator output is valid")
}
