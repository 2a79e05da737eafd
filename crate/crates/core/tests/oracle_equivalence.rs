//! The metrics implementation must agree with the independent row-filtering
//! scorer on identical operands.

use proptest::prelude::*;

use fairpost::metrics::{dataset_score, group_scores, GroupScore};
use fairpost::oracle::{brute_force_dataset_score, brute_force_scores};
use fairpost::tabular::{stratify, BinaryDataset, Schema};

fn arb_dataset() -> impl Strategy<Value = BinaryDataset> {
    (1usize..=64, 1usize..=3, 0usize..=2).prop_flat_map(|(rows, n_p, n_e)| {
        let width = 1 + n_p + n_e;
        proptest::collection::vec(proptest::collection::vec(0u8..2, width), rows).prop_map(
            move |cells| {
                let mut columns = vec!["d".to_string()];
                let mut protected = Vec::new();
                let mut explanatory = Vec::new();
                for i in 0..n_p {
                    let name = format!("p{i}");
                    protected.push(name.clone());
                    columns.push(name);
                }
                for i in 0..n_e {
                    let name = format!("e{i}");
                    explanatory.push(name.clone());
                    columns.push(name);
                }
                let schema = Schema {
                    outcome: "d".into(),
                    protected,
                    explanatory,
                    other: vec![],
                };
                BinaryDataset::new(columns, cells, schema).unwrap()
            },
        )
    })
}

proptest! {
    #[test]
    fn scores_match_bitwise(ds in arb_dataset()) {
        let groups = stratify(&ds);
        let fast = group_scores(&ds, &groups, "d").unwrap();
        let slow = brute_force_scores(&ds);
        prop_assert_eq!(fast.len(), slow.len());
        for (f, s) in fast.iter().zip(&slow) {
            prop_assert_eq!(&f.protected, &s.protected);
            prop_assert_eq!(&f.signature, &s.signature);
            prop_assert_eq!(f.defined, s.defined);
            prop_assert!((f.score - s.score).abs() <= 1e-12);
            prop_assert_eq!(f.score.to_bits(), s.score.to_bits());
        }
    }

    #[test]
    fn dataset_scores_match(ds in arb_dataset()) {
        let groups = stratify(&ds);
        let all = group_scores(&ds, &groups, "d").unwrap();
        for p in &ds.schema().protected {
            let mine: Vec<GroupScore> =
                all.iter().filter(|s| &s.protected == p).cloned().collect();
            let fast = dataset_score(&mine, ds.n_rows());
            let slow = brute_force_dataset_score(&ds, p);
            prop_assert!((fast - slow).abs() <= 1e-12, "{} vs {}", fast, slow);
        }
    }

    #[test]
    fn scores_stay_bounded(ds in arb_dataset()) {
        let groups = stratify(&ds);
        let scores = group_scores(&ds, &groups, "d").unwrap();
        for s in &scores {
            prop_assert!((-1.0..=1.0).contains(&s.score));
            if !s.defined {
                prop_assert_eq!(s.score, 0.0);
            }
        }
        // weighted average never exceeds the worst group
        for p in &ds.schema().protected {
            let mine: Vec<GroupScore> =
                scores.iter().filter(|s| &s.protected == p).cloned().collect();
            let global = dataset_score(&mine, ds.n_rows());
            let max_abs = mine.iter().map(|s| s.score.abs()).fold(0.0, f64::max);
            prop_assert!(global.abs() <= max_abs + 1e-12);
        }
    }
}
