//! Independent brute-force oracles backing the test suite: discrimination
//! scores recomputed by literal row filtering, and exhaustive integer
//! flip-plan search over small division tables.

use thiserror::Error;

use crate::adjuster::ObjectiveVariant;
use crate::divisions::{counterpart, p_value_of_division, DivisionTable};
use crate::tabular::BinaryDataset;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search space too large: m={m}, max count {max_g} (limits: m <= 2, g <= 6)")]
    SearchSpaceTooLarge { m: usize, max_g: u64 },
}

/// Score recomputed from scratch for one (protected attribute, E-group).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleScore {
    pub protected: String,
    pub signature: Vec<(String, u8)>,
    pub score: f64,
    pub defined: bool,
}

/// Recompute every per-(P, E-group) score by filtering rows per condition
/// and dividing counts directly; no counts-table machinery is reused.
pub fn brute_force_scores(dataset: &BinaryDataset) -> Vec<OracleScore> {
    let schema = dataset.schema();
    let e_cols: Vec<usize> = schema
        .explanatory
        .iter()
        .map(|n| dataset.column_index(n).expect("schema validated"))
        .collect();
    let d_col = dataset
        .column_index(&schema.outcome)
        .expect("schema validated");

    let mut sigs: Vec<Vec<u8>> = Vec::new();
    for row in 0..dataset.n_rows() {
        let sig: Vec<u8> = e_cols.iter().map(|&c| dataset.value(row, c)).collect();
        if !sigs.contains(&sig) {
            sigs.push(sig);
        }
    }
    sigs.sort_by(|a, b| b.cmp(a));

    let mut out = Vec::new();
    for p_name in &schema.protected {
        let p_col = dataset.column_index(p_name).expect("schema validated");
        for sig in &sigs {
            let members: Vec<usize> = (0..dataset.n_rows())
                .filter(|&r| e_cols.iter().zip(sig).all(|(&c, &b)| dataset.value(r, c) == b))
                .collect();
            let protected_pop = members
                .iter()
                .filter(|&&r| dataset.value(r, p_col) == 1)
                .count() as u64;
            let other_pop = members
                .iter()
                .filter(|&&r| dataset.value(r, p_col) == 0)
                .count() as u64;
            let (score, defined) = if protected_pop == 0 || other_pop == 0 {
                (0.0, false)
            } else {
                let fav_protected = members
                    .iter()
                    .filter(|&&r| dataset.value(r, p_col) == 1 && dataset.value(r, d_col) == 1)
                    .count() as u64;
                let fav_other = members
                    .iter()
                    .filter(|&&r| dataset.value(r, p_col) == 0 && dataset.value(r, d_col) == 1)
                    .count() as u64;
                (
                    fav_protected as f64 / protected_pop as f64
                        - fav_other as f64 / other_pop as f64,
                    true,
                )
            };
            out.push(OracleScore {
                protected: p_name.clone(),
                signature: schema
                    .explanatory
                    .iter()
                    .cloned()
                    .zip(sig.iter().copied())
                    .collect(),
                score,
                defined,
            });
        }
    }
    out
}

/// Size-weighted average of the brute-force scores of one attribute, groups
/// in descending signature order.
pub fn brute_force_dataset_score(dataset: &BinaryDataset, protected_col: &str) -> f64 {
    if dataset.n_rows() == 0 {
        return 0.0;
    }
    let schema = dataset.schema();
    let e_cols: Vec<usize> = schema
        .explanatory
        .iter()
        .map(|n| dataset.column_index(n).expect("schema validated"))
        .collect();
    let scores = brute_force_scores(dataset);
    scores
        .iter()
        .filter(|s| s.protected == protected_col)
        .map(|s| {
            let size = (0..dataset.n_rows())
                .filter(|&r| {
                    e_cols
                        .iter()
                        .zip(&s.signature)
                        .all(|(&c, (_, b))| dataset.value(r, c) == *b)
                })
                .count();
            s.score * size as f64 / dataset.n_rows() as f64
        })
        .sum()
}

/// Result of exhaustive integer flip-plan search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_objective: f64,
    pub best_plan: Vec<i64>,
    pub feasible_count: u64,
}

const BAND_TOL: f64 = 1e-9;

/// Enumerate every integer plan in the box, count the feasible ones and
/// return the best variant objective. Subtrees whose constraint intervals
/// are entirely inside (or entirely outside) the score band are resolved
/// without descending, which keeps the worst cases tractable.
pub fn enumerate_flip_plans(
    table: &DivisionTable,
    alpha: f64,
    variant: ObjectiveVariant,
) -> Result<OracleResult, OracleError> {
    let m = table.m();
    let max_g = table.counts().iter().copied().max().unwrap_or(0);
    if m > 2 || max_g > 6 {
        return Err(OracleError::SearchSpaceTooLarge { m, max_g });
    }
    let n = table.pair_count();

    let boxes: Vec<(i64, i64)> = (0..n)
        .map(|i| {
            (
                -(table.count(i) as i64),
                table.count(counterpart(i, m)) as i64,
            )
        })
        .collect();

    // per-variable objective terms over the box
    let mut term: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = boxes[i];
        let vals = (lo..=hi)
            .map(|v| objective_term(table, variant, i, v as f64))
            .collect();
        term.push(vals);
    }
    let argmin: Vec<(f64, i64)> = (0..n)
        .map(|i| {
            let (lo, _) = boxes[i];
            term[i]
                .iter()
                .enumerate()
                .map(|(off, &val)| (val, lo + off as i64))
                .fold((f64::INFINITY, lo), |acc, cur| {
                    if cur.0 < acc.0 {
                        cur
                    } else {
                        acc
                    }
                })
        })
        .collect();

    // non-degenerate constraint rows: base score and per-variable coefficient
    let mut bases = Vec::new();
    let mut coefs: Vec<Vec<f64>> = Vec::new();
    for p in 1..=m {
        let (mut f11, mut f10, mut n1, mut n0) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..n {
            if p_value_of_division(i, p, m) == 1 {
                f11 += table.count(i);
                n1 += table.count(i) + table.count(i + n);
            } else {
                f10 += table.count(i);
                n0 += table.count(i) + table.count(i + n);
            }
        }
        if n1 == 0 || n0 == 0 {
            continue;
        }
        bases.push(f11 as f64 / n1 as f64 - f10 as f64 / n0 as f64);
        coefs.push(
            (0..n)
                .map(|i| {
                    if p_value_of_division(i, p, m) == 1 {
                        1.0 / n1 as f64
                    } else {
                        -1.0 / n0 as f64
                    }
                })
                .collect(),
        );
    }

    // suffix bounds for pruning
    let k = bases.len();
    let mut suf_min_obj = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suf_min_obj[i] = suf_min_obj[i + 1] + argmin[i].0;
    }
    let mut suf_expr_min = vec![vec![0.0; n + 1]; k];
    let mut suf_expr_max = vec![vec![0.0; n + 1]; k];
    for c in 0..k {
        for i in (0..n).rev() {
            let (lo, hi) = boxes[i];
            let a = coefs[c][i] * lo as f64;
            let b = coefs[c][i] * hi as f64;
            suf_expr_min[c][i] = suf_expr_min[c][i + 1] + a.min(b);
            suf_expr_max[c][i] = suf_expr_max[c][i + 1] + a.max(b);
        }
    }
    let suffix_sizes: Vec<u64> = {
        let mut sizes = vec![1u64; n + 1];
        for i in (0..n).rev() {
            sizes[i] = sizes[i + 1] * (boxes[i].1 - boxes[i].0 + 1) as u64;
        }
        sizes
    };

    let mut search = Search {
        n,
        alpha,
        boxes: &boxes,
        term: &term,
        argmin: &argmin,
        bases: &bases,
        coefs: &coefs,
        suf_min_obj: &suf_min_obj,
        suf_expr_min: &suf_expr_min,
        suf_expr_max: &suf_expr_max,
        suffix_sizes: &suffix_sizes,
        plan: vec![0; n],
        exprs: vec![0.0; k],
        best_objective: f64::INFINITY,
        best_plan: vec![0; n],
        feasible_count: 0,
    };
    search.recurse(0, 0.0);
    Ok(OracleResult {
        best_objective: search.best_objective,
        best_plan: search.best_plan,
        feasible_count: search.feasible_count,
    })
}

fn objective_term(table: &DivisionTable, variant: ObjectiveVariant, i: usize, t: f64) -> f64 {
    let m = table.m();
    let gi = table.count(i) as f64;
    let gj = table.count(counterpart(i, m)) as f64;
    let err_after = if i.is_multiple_of(2) { gj - t } else { gi + t };
    match variant {
        ObjectiveVariant::Norm => {
            let tot = gi + gj;
            if tot > 0.0 {
                err_after * err_after / tot
            } else {
                0.0
            }
        }
        ObjectiveVariant::Errc => err_after * err_after,
        ObjectiveVariant::Chg => t * t,
    }
}

struct Search<'a> {
    n: usize,
    alpha: f64,
    boxes: &'a [(i64, i64)],
    term: &'a [Vec<f64>],
    argmin: &'a [(f64, i64)],
    bases: &'a [f64],
    coefs: &'a [Vec<f64>],
    suf_min_obj: &'a [f64],
    suf_expr_min: &'a [Vec<f64>],
    suf_expr_max: &'a [Vec<f64>],
    suffix_sizes: &'a [u64],
    plan: Vec<i64>,
    exprs: Vec<f64>,
    best_objective: f64,
    best_plan: Vec<i64>,
    feasible_count: u64,
}

impl Search<'_> {
    fn recurse(&mut self, depth: usize, partial_obj: f64) {
        let mut all_inside = true;
        for c in 0..self.bases.len() {
            let lo = self.bases[c] + self.exprs[c] + self.suf_expr_min[c][depth];
            let hi = self.bases[c] + self.exprs[c] + self.suf_expr_max[c][depth];
            if lo > self.alpha + BAND_TOL || hi < -self.alpha - BAND_TOL {
                return; // no completion can reach the band
            }
            if lo < -self.alpha - BAND_TOL || hi > self.alpha + BAND_TOL {
                all_inside = false;
            }
        }
        if all_inside {
            self.feasible_count += self.suffix_sizes[depth];
            let candidate = partial_obj + self.suf_min_obj[depth];
            if candidate < self.best_objective {
                self.best_objective = candidate;
                self.best_plan[..depth].copy_from_slice(&self.plan[..depth]);
                for i in depth..self.n {
                    self.best_plan[i] = self.argmin[i].1;
                }
            }
            return;
        }
        debug_assert!(depth < self.n, "leaf must resolve to inside or outside");
        let (lo, hi) = self.boxes[depth];
        for v in lo..=hi {
            self.plan[depth] = v;
            for c in 0..self.bases.len() {
                self.exprs[c] += self.coefs[c][depth] * v as f64;
            }
            let term = self.term[depth][(v - lo) as usize];
            self.recurse(depth + 1, partial_obj + term);
            for c in 0..self.bases.len() {
                self.exprs[c] -= self.coefs[c][depth] * v as f64;
            }
        }
    }
}
