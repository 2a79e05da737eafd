//! Discrimination removal: per-E-group flip-plan optimization, the hash
//! model driving stochastic prediction flips, and seeded batch adjustment.
//!
//! One signed variable t is used per counterpart pair, indexed by the
//! predicted-positive block division index. t < 0 flips |t| predictions of
//! that division from 1 to 0; t > 0 flips t predictions of the counterpart
//! division from 0 to 1. The continuous optimum becomes a per-key flip
//! probability |x| / g at serving time.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::divisions::{
    build_division_table, counterpart, p_value_of_division, DivisionError, DivisionTable,
};
use crate::qp::{
    constraint_violation, solve_qp_from, QpError, QpProblem, QpStatus, DEFAULT_MAX_ITERATIONS,
    FEASIBILITY_TOL,
};
use crate::tabular::{stratify, BinaryDataset, TabularError};

const MODEL_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum AdjustError {
    #[error(transparent)]
    Division(#[from] DivisionError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("prediction vector has {found} entries, dataset has {expected} rows")]
    PredictionLength { expected: usize, found: usize },
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("unknown objective variant `{0}` (expected norm, errc or chg)")]
    UnknownVariant(String),
    #[error("solver failed on E-group {signature}: {status:?}")]
    GroupSolveFailed { signature: String, status: QpStatus },
    #[error(
        "post-flip score check failed on E-group {signature}, attribute {protected}: \
         |{score}| > alpha {alpha}"
    )]
    ConstraintCheckFailed {
        signature: String,
        protected: String,
        score: f64,
        alpha: f64,
    },
    #[error("schema fingerprint mismatch: model {model}, dataset {dataset}")]
    FingerprintMismatch { model: String, dataset: String },
    #[error("unsupported model version {0}")]
    VersionMismatch(u64),
    #[error("malformed model file: {0}")]
    Malformed(String),
}

/// Objective used when choosing flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveVariant {
    /// Squared post-adjustment error counts, normalized by pair population.
    Norm,
    /// Raw squared post-adjustment error counts.
    Errc,
    /// Squared adjustment magnitudes (smallest change to the predictions).
    Chg,
}

impl fmt::Display for ObjectiveVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObjectiveVariant::Norm => "norm",
            ObjectiveVariant::Errc => "errc",
            ObjectiveVariant::Chg => "chg",
        };
        f.write_str(s)
    }
}

impl FromStr for ObjectiveVariant {
    type Err = AdjustError;
    fn from_str(s: &str) -> Result<Self, AdjustError> {
        match s {
            "norm" => Ok(ObjectiveVariant::Norm),
            "errc" => Ok(ObjectiveVariant::Errc),
            "chg" => Ok(ObjectiveVariant::Chg),
            other => Err(AdjustError::UnknownVariant(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjustParams {
    pub alpha: f64,
    pub variant: ObjectiveVariant,
    pub seed: u64,
    /// E-groups smaller than this keep their predictions untouched.
    pub min_group_size: usize,
}

impl AdjustParams {
    pub fn new(alpha: f64, variant: ObjectiveVariant, seed: u64) -> Self {
        AdjustParams {
            alpha,
            variant,
            seed,
            min_group_size: 0,
        }
    }
}

/// Signed flip counts, one per counterpart pair: t < 0 flips predicted
/// positives of the pair's first division, t > 0 flips predicted negatives
/// of its counterpart.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipPlan {
    pub m: usize,
    pub t: Vec<f64>,
}

impl FlipPlan {
    /// Box invariant against the table that produced the plan:
    /// `-g_i <= t_i <= g_counterpart(i)`.
    pub fn in_bounds(&self, table: &DivisionTable) -> bool {
        self.m == table.m()
            && self.t.len() == table.pair_count()
            && self.t.iter().enumerate().all(|(i, &t)| {
                let slack = 1e-9;
                t >= -(table.count(i) as f64) - slack
                    && t <= table.count(counterpart(i, self.m)) as f64 + slack
            })
    }
}

/// Hash-table value under one (predicted outcome, protected bits) key:
/// population g and non-positive outflow mass x.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentEntry {
    pub dhat: u8,
    pub p: Vec<u8>,
    pub g: u64,
    pub x: f64,
}

/// Per-group hash table plus its E-signature.
#[derive(Debug, Clone)]
pub struct GroupModel {
    pub signature: Vec<(String, u8)>,
    pub entries: Vec<AdjustmentEntry>,
    entry_index: HashMap<(u8, Vec<u8>), usize>,
}

impl PartialEq for GroupModel {
    fn eq(&self, other: &Self) -> bool {
        self.signature == other.signature && self.entries == other.entries
    }
}

impl GroupModel {
    pub fn new(signature: Vec<(String, u8)>, entries: Vec<AdjustmentEntry>) -> Self {
        let entry_index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| ((e.dhat, e.p.clone()), i))
            .collect();
        GroupModel {
            signature,
            entries,
            entry_index,
        }
    }

    pub fn entry(&self, dhat: u8, p_bits: &[u8]) -> Option<&AdjustmentEntry> {
        self.entry_index
            .get(&(dhat, p_bits.to_vec()))
            .map(|&i| &self.entries[i])
    }
}

/// Per-group solve summary kept alongside the model (not serialized).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDiagnostics {
    pub signature: Vec<(String, u8)>,
    pub size: usize,
    pub status: QpStatus,
    pub skipped_min_size: bool,
    /// Expected post-flip score per protected attribute; None when that
    /// attribute has an empty contrast side in the group.
    pub expected_scores: Vec<(String, Option<f64>)>,
}

/// The adjustment model: one hash table per training E-group.
#[derive(Debug, Clone)]
pub struct FairModel {
    pub alpha: f64,
    pub schema_fingerprint: String,
    pub groups: Vec<GroupModel>,
    pub diagnostics: Vec<GroupDiagnostics>,
    group_index: HashMap<Vec<u8>, usize>,
}

impl PartialEq for FairModel {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha
            && self.schema_fingerprint == other.schema_fingerprint
            && self.groups == other.groups
    }
}

impl FairModel {
    pub fn new(
        alpha: f64,
        schema_fingerprint: String,
        groups: Vec<GroupModel>,
        diagnostics: Vec<GroupDiagnostics>,
    ) -> Self {
        let group_index = groups
            .iter()
            .enumerate()
            .map(|(i, g)| (g.signature.iter().map(|(_, b)| *b).collect::<Vec<u8>>(), i))
            .collect();
        FairModel {
            alpha,
            schema_fingerprint,
            groups,
            diagnostics,
            group_index,
        }
    }

    pub fn group(&self, e_bits: &[u8]) -> Option<&GroupModel> {
        self.group_index
            .get(e_bits)
            .map(|&i| &self.groups[i])
    }
}

// ---------------------------------------------------------------------------
// problem assembly

/// Index into the entry list for a (dhat, P-bit) key, matching division
/// order: predicted-positive block first, P descending.
fn entry_slot(dhat: u8, p_bits: &[u8]) -> usize {
    let m = p_bits.len();
    let mut idx = ((1 - dhat) as usize) << m;
    for (p, &bit) in p_bits.iter().enumerate() {
        idx |= ((1 - bit) as usize) << (m - 1 - p);
    }
    idx
}

/// Per-attribute prediction counts over the division table:
/// (f11, f10, n1, n0) where f uses the predicted outcome and n are the
/// flip-invariant protected-population sizes.
fn attribute_counts(table: &DivisionTable, p: usize) -> (f64, f64, f64, f64) {
    let m = table.m();
    let pairs = table.pair_count();
    let (mut f11, mut f10, mut f01, mut f00) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..pairs {
        if p_value_of_division(i, p, m) == 1 {
            f11 += table.count(i);
            f01 += table.count(i + pairs);
        } else {
            f10 += table.count(i);
            f00 += table.count(i + pairs);
        }
    }
    (
        f11 as f64,
        f10 as f64,
        (f11 + f01) as f64,
        (f10 + f00) as f64,
    )
}

/// Build the flip optimization problem for one division table: box bounds
/// from the pair populations, two linear rows per non-degenerate protected
/// attribute keeping the post-flip score within [-alpha, alpha], and the
/// variant objective expanded to diagonal quadratic plus linear terms
/// (constants dropped).
pub fn assemble_problem(
    table: &DivisionTable,
    alpha: f64,
    variant: ObjectiveVariant,
) -> Result<QpProblem, AdjustError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(AdjustError::InvalidAlpha(alpha));
    }
    let m = table.m();
    let n = table.pair_count();

    let mut q = vec![0.0; n];
    let mut c = vec![0.0; n];
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        let gi = table.count(i) as f64;
        let gj = table.count(counterpart(i, m)) as f64;
        lo[i] = -gi;
        hi[i] = gj;
        let d_is_one = i % 2 == 0; // actual outcome is the least significant bit
        match variant {
            ObjectiveVariant::Norm => {
                let tot = gi + gj;
                if tot > 0.0 {
                    q[i] = 1.0 / tot;
                    c[i] = if d_is_one { -2.0 * gj / tot } else { 2.0 * gi / tot };
                }
            }
            ObjectiveVariant::Errc => {
                q[i] = 1.0;
                c[i] = if d_is_one { -2.0 * gj } else { 2.0 * gi };
            }
            ObjectiveVariant::Chg => {
                q[i] = 1.0;
            }
        }
    }

    let mut a = Vec::new();
    let mut b = Vec::new();
    for p in 1..=m {
        let (f11, f10, n1, n0) = attribute_counts(table, p);
        if n1 == 0.0 || n0 == 0.0 {
            continue; // no contrast population, no constraint
        }
        let base = f11 / n1 - f10 / n0;
        let coef: Vec<f64> = (0..n)
            .map(|i| {
                if p_value_of_division(i, p, m) == 1 {
                    1.0 / n1
                } else {
                    -1.0 / n0
                }
            })
            .collect();
        a.extend(coef.iter().copied());
        b.push(alpha - base);
        a.extend(coef.iter().map(|v| -v));
        b.push(alpha + base);
    }

    Ok(QpProblem { q, c, a, b, lo, hi })
}

/// Variant objective at a (possibly fractional) plan, constants included, so
/// values are comparable across solvers and enumeration.
pub fn objective_value(table: &DivisionTable, variant: ObjectiveVariant, t: &[f64]) -> f64 {
    let m = table.m();
    let n = table.pair_count();
    assert_eq!(t.len(), n, "plan length mismatch");
    let mut total = 0.0;
    for i in 0..n {
        let gi = table.count(i) as f64;
        let gj = table.count(counterpart(i, m)) as f64;
        let d_is_one = i % 2 == 0;
        let err_after = if d_is_one { gj - t[i] } else { gi + t[i] };
        total += match variant {
            ObjectiveVariant::Norm => {
                let tot = gi + gj;
                if tot > 0.0 {
                    err_after * err_after / tot
                } else {
                    0.0
                }
            }
            ObjectiveVariant::Errc => err_after * err_after,
            ObjectiveVariant::Chg => t[i] * t[i],
        };
    }
    total
}

/// Expected post-flip score per protected attribute under a fractional plan;
/// None for attributes with an empty contrast side.
pub fn expected_scores(table: &DivisionTable, t: &[f64]) -> Vec<Option<f64>> {
    let m = table.m();
    let n = table.pair_count();
    (1..=m)
        .map(|p| {
            let (f11, f10, n1, n0) = attribute_counts(table, p);
            if n1 == 0.0 || n0 == 0.0 {
                return None;
            }
            let mut u1 = 0.0;
            let mut u0 = 0.0;
            for i in 0..n {
                if p_value_of_division(i, p, m) == 1 {
                    u1 += t[i];
                } else {
                    u0 += t[i];
                }
            }
            Some((f11 + u1) / n1 - (f10 + u0) / n0)
        })
        .collect()
}

/// The always-feasible plan: flip every predicted-positive tuple, zeroing
/// both post-flip rates.
pub fn lemma_fallback(table: &DivisionTable) -> Vec<f64> {
    (0..table.pair_count())
        .map(|i| -(table.count(i) as f64))
        .collect()
}

/// Aggregate a flip plan into the per-key hash entries: each (dhat, P) key
/// covers the two divisions differing in the actual outcome, g sums their
/// populations and x collects the gross outflow leaving the key.
pub fn plan_entries(table: &DivisionTable, plan: &FlipPlan) -> Vec<AdjustmentEntry> {
    debug_assert!(plan.in_bounds(table));
    let t = &plan.t;
    let n = table.pair_count();
    let keys = 1 << table.m();
    let mut entries = Vec::with_capacity(2 * keys);
    for key in 0..keys {
        let i = 2 * key; // D=1 division of the key within the block
        let i2 = 2 * key + 1;
        let p_bits = table.signature(i).p;

        let g_pos = table.count(i) + table.count(i2);
        let out_pos = (-t[i]).max(0.0) + (-t[i2]).max(0.0);
        entries.push(make_entry(1, p_bits.clone(), g_pos, out_pos));

        let g_neg = table.count(i + n) + table.count(i2 + n);
        let out_neg = t[i].max(0.0) + t[i2].max(0.0);
        entries.push(make_entry(0, p_bits, g_neg, out_neg));
    }
    // predicted-positive block first, then predicted-negative, both in
    // division order
    entries.sort_by_key(|e| entry_slot(e.dhat, &e.p));
    entries
}

fn make_entry(dhat: u8, p: Vec<u8>, g: u64, outflow: f64) -> AdjustmentEntry {
    let mut x = -outflow;
    // numerical dust from the solver: clamp into the entry invariant
    x = x.max(-(g as f64));
    if g == 0 || x > -1e-9 {
        x = 0.0;
    }
    AdjustmentEntry { dhat, p, g, x }
}

fn signature_text(signature: &[(String, u8)]) -> String {
    if signature.is_empty() {
        return "<all rows>".to_string();
    }
    signature
        .iter()
        .map(|(c, b)| format!("{c}={b}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Build the adjustment model: stratify, solve one flip problem per E-group
/// (groups are independent and processed in parallel), convert plans to
/// hash entries, and verify every expected post-flip score against alpha.
pub fn build_model(
    dataset: &BinaryDataset,
    predictions: &[u8],
    params: &AdjustParams,
) -> Result<FairModel, AdjustError> {
    if !(0.0..=1.0).contains(&params.alpha) {
        return Err(AdjustError::InvalidAlpha(params.alpha));
    }
    if predictions.len() != dataset.n_rows() {
        return Err(AdjustError::PredictionLength {
            expected: dataset.n_rows(),
            found: predictions.len(),
        });
    }
    let groups = stratify(dataset);
    let protected = dataset.schema().protected.clone();

    let built: Result<Vec<(GroupModel, GroupDiagnostics)>, AdjustError> = groups
        .par_iter()
        .map(|group| {
            let table = build_division_table(dataset, group, predictions)?;
            let skipped = group.len() < params.min_group_size;
            let (plan, status) = if skipped {
                let plan = FlipPlan {
                    m: table.m(),
                    t: vec![0.0; table.pair_count()],
                };
                (plan, QpStatus::Optimal)
            } else {
                let problem = assemble_problem(&table, params.alpha, params.variant)?;
                let zero = vec![0.0; problem.n()];
                let start = if constraint_violation(&problem, &zero) <= FEASIBILITY_TOL {
                    zero
                } else {
                    lemma_fallback(&table)
                };
                let sol = solve_qp_from(&problem, Some(&start), DEFAULT_MAX_ITERATIONS)?;
                if sol.status != QpStatus::Optimal {
                    return Err(AdjustError::GroupSolveFailed {
                        signature: signature_text(&group.signature),
                        status: sol.status,
                    });
                }
                let plan = FlipPlan {
                    m: table.m(),
                    t: sol.x,
                };
                (plan, sol.status)
            };

            let scores = expected_scores(&table, &plan.t);
            if !skipped {
                for (p_name, score) in protected.iter().zip(&scores) {
                    if let Some(s) = score {
                        if s.abs() > params.alpha + 1e-6 {
                            return Err(AdjustError::ConstraintCheckFailed {
                                signature: signature_text(&group.signature),
                                protected: p_name.clone(),
                                score: *s,
                                alpha: params.alpha,
                            });
                        }
                    }
                }
            }

            let entries = plan_entries(&table, &plan);
            let diag = GroupDiagnostics {
                signature: group.signature.clone(),
                size: group.len(),
                status,
                skipped_min_size: skipped,
                expected_scores: protected.iter().cloned().zip(scores).collect(),
            };
            Ok((GroupModel::new(group.signature.clone(), entries), diag))
        })
        .collect();

    let (group_models, diagnostics): (Vec<_>, Vec<_>) = built?.into_iter().unzip();
    Ok(FairModel::new(
        params.alpha,
        dataset.schema().fingerprint(),
        group_models,
        diagnostics,
    ))
}

// ---------------------------------------------------------------------------
// serving

/// What happened to one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdjustOutcome {
    Kept,
    Flipped,
    /// E-signature or key unseen at training time; returned unchanged.
    PassThrough,
}

/// Uniform real in [0, 1) with 53-bit precision.
pub fn draw_unit(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent per-row random stream: one counter-based generator keyed by
/// (seed, row index), so parallel and serial application agree.
pub fn row_rng(seed: u64, row_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(row_index);
    rng
}

/// Adjust one prediction. Draws from the stream only when the key has
/// outflow to apply.
pub fn adjust_prediction(
    model: &FairModel,
    p_bits: &[u8],
    e_bits: &[u8],
    d_hat: u8,
    rng: &mut ChaCha8Rng,
) -> (u8, AdjustOutcome) {
    let Some(group) = model.group(e_bits) else {
        return (d_hat, AdjustOutcome::PassThrough);
    };
    let Some(entry) = group.entry(d_hat, p_bits) else {
        return (d_hat, AdjustOutcome::PassThrough);
    };
    if entry.x < 0.0 && entry.g > 0 {
        let rd = draw_unit(rng);
        if rd < -entry.x / entry.g as f64 {
            return (1 - d_hat, AdjustOutcome::Flipped);
        }
    }
    (d_hat, AdjustOutcome::Kept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct AdjustCounters {
    pub rows: u64,
    pub flips: u64,
    pub pass_throughs: u64,
}

/// Apply the model row by row with deterministic per-row substreams.
pub fn adjust_batch(
    model: &FairModel,
    dataset: &BinaryDataset,
    predictions: &[u8],
    seed: u64,
) -> Result<(Vec<u8>, AdjustCounters), AdjustError> {
    if predictions.len() != dataset.n_rows() {
        return Err(AdjustError::PredictionLength {
            expected: dataset.n_rows(),
            found: predictions.len(),
        });
    }
    let dataset_fp = dataset.schema().fingerprint();
    if dataset_fp != model.schema_fingerprint {
        return Err(AdjustError::FingerprintMismatch {
            model: model.schema_fingerprint.clone(),
            dataset: dataset_fp,
        });
    }
    let schema = dataset.schema();
    let mut adjusted = Vec::with_capacity(predictions.len());
    let mut counters = AdjustCounters::default();
    for (row, &d_hat) in predictions.iter().enumerate() {
        let p_bits = dataset.row_bits(row, &schema.protected)?;
        let e_bits = dataset.row_bits(row, &schema.explanatory)?;
        let mut rng = row_rng(seed, row as u64);
        let (bit, outcome) = adjust_prediction(model, &p_bits, &e_bits, d_hat, &mut rng);
        match outcome {
            AdjustOutcome::Flipped => counters.flips += 1,
            AdjustOutcome::PassThrough => counters.pass_throughs += 1,
            AdjustOutcome::Kept => {}
        }
        counters.rows += 1;
        adjusted.push(bit);
    }
    Ok((adjusted, counters))
}

// ---------------------------------------------------------------------------
// persistence

/// Serialize to the versioned JSON model format.
pub fn save_model(model: &FairModel) -> String {
    let groups: Vec<Value> = model
        .groups
        .iter()
        .map(|g| {
            let mut sig = Map::new();
            for (col, bit) in &g.signature {
                sig.insert(col.clone(), json!(bit));
            }
            let entries: Vec<Value> = g
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "dhat": e.dhat,
                        "p": e.p,
                        "g": e.g,
                        "x": e.x,
                    })
                })
                .collect();
            json!({ "signature": Value::Object(sig), "entries": entries })
        })
        .collect();
    let file = json!({
        "version": MODEL_VERSION,
        "alpha": model.alpha,
        "schema_fingerprint": model.schema_fingerprint,
        "groups": groups,
    });
    serde_json::to_string_pretty(&file).expect("model serializes")
}

fn field<'v>(obj: &'v Map<String, Value>, key: &str) -> Result<&'v Value, AdjustError> {
    obj.get(key)
        .ok_or_else(|| AdjustError::Malformed(format!("missing key `{key}`")))
}

fn as_bit(v: &Value, what: &str) -> Result<u8, AdjustError> {
    match v.as_u64() {
        Some(0) => Ok(0),
        Some(1) => Ok(1),
        _ => Err(AdjustError::Malformed(format!("{what} must be 0 or 1"))),
    }
}

/// Parse a model file, verifying version and entry invariants.
pub fn load_model(text: &str) -> Result<FairModel, AdjustError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| AdjustError::Malformed(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| AdjustError::Malformed("top level is not an object".into()))?;
    let version = field(obj, "version")?
        .as_u64()
        .ok_or_else(|| AdjustError::Malformed("version is not an integer".into()))?;
    if version != MODEL_VERSION {
        return Err(AdjustError::VersionMismatch(version));
    }
    let alpha = field(obj, "alpha")?
        .as_f64()
        .ok_or_else(|| AdjustError::Malformed("alpha is not a number".into()))?;
    let fingerprint = field(obj, "schema_fingerprint")?
        .as_str()
        .ok_or_else(|| AdjustError::Malformed("schema_fingerprint is not a string".into()))?
        .to_string();
    let groups_val = field(obj, "groups")?
        .as_array()
        .ok_or_else(|| AdjustError::Malformed("groups is not an array".into()))?;

    let mut groups = Vec::with_capacity(groups_val.len());
    for gv in groups_val {
        let gobj = gv
            .as_object()
            .ok_or_else(|| AdjustError::Malformed("group is not an object".into()))?;
        let sig_obj = field(gobj, "signature")?
            .as_object()
            .ok_or_else(|| AdjustError::Malformed("signature is not an object".into()))?;
        let signature: Vec<(String, u8)> = sig_obj
            .iter()
            .map(|(k, v)| as_bit(v, "signature bit").map(|b| (k.clone(), b)))
            .collect::<Result<_, _>>()?;
        let entries_val = field(gobj, "entries")?
            .as_array()
            .ok_or_else(|| AdjustError::Malformed("entries is not an array".into()))?;
        let mut entries = Vec::with_capacity(entries_val.len());
        for ev in entries_val {
            let eobj = ev
                .as_object()
                .ok_or_else(|| AdjustError::Malformed("entry is not an object".into()))?;
            let dhat = as_bit(field(eobj, "dhat")?, "dhat")?;
            let p = field(eobj, "p")?
                .as_array()
                .ok_or_else(|| AdjustError::Malformed("p is not an array".into()))?
                .iter()
                .map(|v| as_bit(v, "p bit"))
                .collect::<Result<Vec<u8>, _>>()?;
            let g = field(eobj, "g")?
                .as_u64()
                .ok_or_else(|| AdjustError::Malformed("g is not a nonnegative integer".into()))?;
            let x = field(eobj, "x")?
                .as_f64()
                .ok_or_else(|| AdjustError::Malformed("x is not a number".into()))?;
            if x > 0.0 || x < -(g as f64) - 1e-9 {
                return Err(AdjustError::Malformed(format!(
                    "entry outflow x={x} outside [-g, 0] for g={g}"
                )));
            }
            entries.push(AdjustmentEntry { dhat, p, g, x });
        }
        groups.push(GroupModel::new(signature, entries));
    }
    let model = FairModel::new(alpha, fingerprint, groups, Vec::new());
    if model.group_index.len() != model.groups.len() {
        return Err(AdjustError::Malformed(
            "duplicate E-group signature".into(),
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Schema;
    use approx::assert_abs_diff_eq;

    fn table_m1(g: [u64; 8]) -> DivisionTable {
        DivisionTable::from_counts(1, g.to_vec()).unwrap()
    }

    #[test]
    fn fallback_satisfies_constraints() {
        let table = table_m1([4, 0, 0, 2, 0, 0, 0, 0]);
        let problem = assemble_problem(&table, 0.05, ObjectiveVariant::Chg).unwrap();
        let fallback = lemma_fallback(&table);
        assert!(constraint_violation(&problem, &fallback) <= FEASIBILITY_TOL);
        let scores = expected_scores(&table, &fallback);
        for s in scores.into_iter().flatten() {
            assert_abs_diff_eq!(s, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_plan_feasible_when_already_fair() {
        // balanced: one correct positive and one correct negative per side
        let table = table_m1([1, 0, 1, 0, 0, 1, 0, 1]);
        for variant in [
            ObjectiveVariant::Norm,
            ObjectiveVariant::Errc,
            ObjectiveVariant::Chg,
        ] {
            let problem = assemble_problem(&table, 0.05, variant).unwrap();
            let zero = vec![0.0; problem.n()];
            assert!(constraint_violation(&problem, &zero) <= FEASIBILITY_TOL);
        }
    }

    #[test]
    fn extreme_table_solved_by_integer_enumeration() {
        // four correct positives on the protected side, two wrong positives
        // on the other: the predicted score sits at 0, so plans that fix the
        // two errors must not push it past alpha
        let table = table_m1([4, 0, 0, 2, 0, 0, 0, 0]);
        let alpha = 0.05;
        let scores = expected_scores(&table, &[0.0; 4]);
        assert_abs_diff_eq!(scores[0].unwrap(), 0.0, epsilon = 1e-12);

        for variant in [
            ObjectiveVariant::Norm,
            ObjectiveVariant::Errc,
            ObjectiveVariant::Chg,
        ] {
            let problem = assemble_problem(&table, alpha, variant).unwrap();
            let start = lemma_fallback(&table);
            let sol = solve_qp_from(&problem, Some(&start), DEFAULT_MAX_ITERATIONS).unwrap();
            assert_eq!(sol.status, QpStatus::Optimal, "variant {variant}");

            // brute-force integer plans in the box
            let mut best = f64::INFINITY;
            for t0 in -4..=0i64 {
                for t3 in -2..=0i64 {
                    // pairs 1 and 2 have empty boxes (g=0 both sides)
                    let t = [t0 as f64, 0.0, 0.0, t3 as f64];
                    if constraint_violation(&problem, &t) <= 1e-9 {
                        best = best.min(objective_value(&table, variant, &t));
                    }
                }
            }
            let relaxed = objective_value(&table, variant, &sol.x);
            assert!(
                relaxed <= best + 1e-6,
                "variant {variant}: relaxed {relaxed} vs integer best {best}"
            );
        }
    }

    #[test]
    fn entry_slot_order() {
        assert_eq!(entry_slot(1, &[1]), 0);
        assert_eq!(entry_slot(1, &[0]), 1);
        assert_eq!(entry_slot(0, &[1]), 2);
        assert_eq!(entry_slot(0, &[0]), 3);
    }

    #[test]
    fn plan_converts_to_gross_outflow_entries() {
        let table = table_m1([4, 1, 2, 3, 5, 2, 1, 0]);
        // pair 0: flip 1.5 out of the positive side; pair 1: flip 1 in from
        // the negative side
        let t = [-1.5, 1.0, 0.0, 0.0];
        let entries = plan_entries(&table, &FlipPlan { m: 1, t: t.to_vec() });
        // key (dhat=1, p=1) covers pairs 0 and 1
        let e = &entries[entry_slot(1, &[1])];
        assert_eq!(e.g, 5);
        assert_abs_diff_eq!(e.x, -1.5, epsilon = 1e-12);
        let e = &entries[entry_slot(0, &[1])];
        assert_eq!(e.g, 7);
        assert_abs_diff_eq!(e.x, -1.0, epsilon = 1e-12);
        // untouched keys have zero outflow
        let e = &entries[entry_slot(1, &[0])];
        assert_eq!((e.g, e.x), (5, 0.0));
    }

    #[test]
    fn population_conserved_in_entries() {
        let table = table_m1([4, 1, 2, 3, 5, 2, 1, 0]);
        let plan = FlipPlan { m: 1, t: vec![-1.0, 0.5, -2.0, -1.0] };
        let entries = plan_entries(&table, &plan);
        let total: u64 = entries.iter().map(|e| e.g).sum();
        assert_eq!(total, table.total());
    }

    fn toy_dataset() -> (BinaryDataset, Vec<u8>) {
        // one protected column, one explanatory column, planted imbalance
        let mut rows = Vec::new();
        let mut push = |e: u8, p: u8, d: u8, n: usize| {
            for _ in 0..n {
                rows.push(vec![p, e, d]);
            }
        };
        push(1, 1, 1, 9);
        push(1, 0, 1, 3);
        push(1, 1, 0, 20);
        push(1, 0, 0, 30);
        push(0, 1, 1, 1);
        push(0, 0, 1, 12);
        push(0, 1, 0, 20);
        push(0, 0, 0, 30);
        let ds = BinaryDataset::new(
            vec!["sex".into(), "sec".into(), "income".into()],
            rows,
            Schema::new("income", &["sex"], &["sec"], &[]),
        )
        .unwrap();
        let predictions = ds.column("income").unwrap();
        (ds, predictions)
    }

    #[test]
    fn model_meets_alpha_in_every_group() {
        let (ds, predictions) = toy_dataset();
        let params = AdjustParams::new(0.05, ObjectiveVariant::Norm, 7);
        let model = build_model(&ds, &predictions, &params).unwrap();
        assert_eq!(model.groups.len(), 2);
        for diag in &model.diagnostics {
            assert_eq!(diag.status, QpStatus::Optimal);
            for (_, score) in &diag.expected_scores {
                if let Some(s) = score {
                    assert!(s.abs() <= 0.05 + 1e-6, "score {s}");
                }
            }
        }
    }

    #[test]
    fn already_fair_model_is_pass_through() {
        let rows = vec![
            vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0],
            vec![1, 1], vec![1, 0], vec![0, 1], vec![0, 0],
        ];
        let ds = BinaryDataset::new(
            vec!["p".into(), "d".into()],
            rows,
            Schema::new("d", &["p"], &[], &[]),
        )
        .unwrap();
        let predictions = ds.column("d").unwrap();
        let params = AdjustParams::new(0.05, ObjectiveVariant::Chg, 1);
        let model = build_model(&ds, &predictions, &params).unwrap();
        for group in &model.groups {
            for entry in &group.entries {
                assert_eq!(entry.x, 0.0);
            }
        }
        let (adjusted, counters) = adjust_batch(&model, &ds, &predictions, 99).unwrap();
        assert_eq!(adjusted, predictions);
        assert_eq!(counters.flips, 0);
        assert_eq!(counters.pass_throughs, 0);
    }

    #[test]
    fn single_row_group_entries_bounded() {
        let rows = vec![vec![1, 1, 1], vec![0, 0, 0]];
        let ds = BinaryDataset::new(
            vec!["p".into(), "e".into(), "d".into()],
            rows,
            Schema::new("d", &["p"], &["e"], &[]),
        )
        .unwrap();
        let predictions = vec![1, 0];
        let params = AdjustParams::new(0.1, ObjectiveVariant::Norm, 3);
        let model = build_model(&ds, &predictions, &params).unwrap();
        for group in &model.groups {
            for entry in &group.entries {
                assert!(entry.g <= 1);
                if entry.g == 0 {
                    assert_eq!(entry.x, 0.0);
                }
            }
        }
    }

    #[test]
    fn flip_probability_extremes() {
        let group = GroupModel::new(
            vec![],
            vec![
                AdjustmentEntry { dhat: 1, p: vec![1], g: 10, x: 0.0 },
                AdjustmentEntry { dhat: 1, p: vec![0], g: 10, x: -10.0 },
            ],
        );
        let model = FairModel::new(0.05, "fp".into(), vec![group], vec![]);
        for row in 0..200 {
            let mut rng = row_rng(5, row);
            let (bit, outcome) = adjust_prediction(&model, &[1], &[], 1, &mut rng);
            assert_eq!((bit, outcome), (1, AdjustOutcome::Kept));
            let mut rng = row_rng(5, row);
            let (bit, outcome) = adjust_prediction(&model, &[0], &[], 1, &mut rng);
            assert_eq!((bit, outcome), (0, AdjustOutcome::Flipped));
        }
    }

    #[test]
    fn unseen_signature_passes_through() {
        let model = FairModel::new(0.05, "fp".into(), vec![], vec![]);
        let mut rng = row_rng(0, 0);
        let (bit, outcome) = adjust_prediction(&model, &[1], &[1], 1, &mut rng);
        assert_eq!((bit, outcome), (1, AdjustOutcome::PassThrough));
    }

    #[test]
    fn batch_deterministic_per_seed() {
        let (ds, predictions) = toy_dataset();
        let params = AdjustParams::new(0.05, ObjectiveVariant::Norm, 7);
        let model = build_model(&ds, &predictions, &params).unwrap();
        let (a, ca) = adjust_batch(&model, &ds, &predictions, 1234).unwrap();
        let (b, cb) = adjust_batch(&model, &ds, &predictions, 1234).unwrap();
        assert_eq!(a, b);
        assert_eq!(ca, cb);
        let (c, _) = adjust_batch(&model, &ds, &predictions, 4321).unwrap();
        assert_eq!(a.len(), c.len());
    }

    #[test]
    fn save_load_round_trip() {
        let (ds, predictions) = toy_dataset();
        let params = AdjustParams::new(0.05, ObjectiveVariant::Errc, 7);
        let model = build_model(&ds, &predictions, &params).unwrap();
        let text = save_model(&model);
        let loaded = load_model(&text).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn empty_model_round_trip() {
        let model = FairModel::new(0.2, "abc".into(), vec![], vec![]);
        let loaded = load_model(&save_model(&model)).unwrap();
        assert_eq!(model, loaded);
        assert!(loaded.groups.is_empty());
    }

    #[test]
    fn truncated_model_rejected() {
        let (ds, predictions) = toy_dataset();
        let params = AdjustParams::new(0.05, ObjectiveVariant::Chg, 7);
        let model = build_model(&ds, &predictions, &params).unwrap();
        let text = save_model(&model);
        let err = load_model(&text[..text.len() / 2]).unwrap_err();
        assert!(matches!(err, AdjustError::Malformed(_)));
    }

    #[test]
    fn version_mismatch_rejected() {
        let text = r#"{"version": 2, "alpha": 0.05, "schema_fingerprint": "x", "groups": []}"#;
        let err = load_model(text).unwrap_err();
        assert!(matches!(err, AdjustError::VersionMismatch(2)));
    }

    #[test]
    fn duplicate_group_signature_rejected() {
        let text = r#"{
            "version": 1, "alpha": 0.05, "schema_fingerprint": "x",
            "groups": [
                {"signature": {"e": 1}, "entries": []},
                {"signature": {"e": 1}, "entries": []}
            ]
        }"#;
        let err = load_model(text).unwrap_err();
        assert!(matches!(err, AdjustError::Malformed(_)));
    }

    #[test]
    fn out_of_bounds_plan_detected() {
        let table = table_m1([4, 0, 0, 2, 0, 0, 0, 0]);
        let ok = FlipPlan {
            m: 1,
            t: vec![-4.0, 0.0, 0.0, -2.0],
        };
        assert!(ok.in_bounds(&table));
        let too_deep = FlipPlan {
            m: 1,
            t: vec![-5.0, 0.0, 0.0, 0.0],
        };
        assert!(!too_deep.in_bounds(&table));
    }

    #[test]
    fn fingerprint_mismatch_rejected() {
        let (ds, predictions) = toy_dataset();
        let params = AdjustParams::new(0.05, ObjectiveVariant::Chg, 7);
        let mut model = build_model(&ds, &predictions, &params).unwrap();
        model.schema_fingerprint = "other".into();
        let err = adjust_batch(&model, &ds, &predictions, 1).unwrap_err();
        assert!(matches!(err, AdjustError::FingerprintMismatch { .. }));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!(
            "norm".parse::<ObjectiveVariant>().unwrap(),
            ObjectiveVariant::Norm
        );
        assert_eq!(
            "chg".parse::<ObjectiveVariant>().unwrap(),
            ObjectiveVariant::Chg
        );
        assert!("nrm".parse::<ObjectiveVariant>().is_err());
    }

    #[test]
    fn min_group_size_skips_small_groups() {
        let (ds, predictions) = toy_dataset();
        let mut params = AdjustParams::new(0.05, ObjectiveVariant::Norm, 7);
        params.min_group_size = 1000;
        let model = build_model(&ds, &predictions, &params).unwrap();
        assert!(model.diagnostics.iter().all(|d| d.skipped_min_size));
        for group in &model.groups {
            assert!(group.entries.iter().all(|e| e.x == 0.0));
        }
    }
}
