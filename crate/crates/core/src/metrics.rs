//! Discrimination scores at division, E-group, dataset and overall levels,
//! plus the accuracy metrics used to judge adjustment cost.

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::tabular::{counts_from_bits, BinaryDataset, CountsTable, EGroup, TabularError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("label sequences are empty")]
    EmptyLabels,
    #[error("label sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
}

/// Score of one protected attribute inside one E-group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupScore {
    pub protected: String,
    pub signature: Vec<(String, u8)>,
    pub score: f64,
    pub size: usize,
    pub defined: bool,
}

/// Difference of favorable-outcome rates between the protected and
/// unprotected populations. Returns `(0.0, false)` when either contrast side
/// is empty.
pub fn division_score(counts: &CountsTable) -> (f64, bool) {
    let n1 = counts.f11 + counts.f01;
    let n0 = counts.f10 + counts.f00;
    if n1 == 0 || n0 == 0 {
        return (0.0, false);
    }
    let score = counts.f11 as f64 / n1 as f64 - counts.f10 as f64 / n0 as f64;
    (score, true)
}

/// One score per (protected attribute, E-group), protected attributes in
/// schema order, groups in the given order.
pub fn group_scores(
    dataset: &BinaryDataset,
    groups: &[EGroup],
    outcome_col: &str,
) -> Result<Vec<GroupScore>, MetricsError> {
    let outcome = dataset.column(outcome_col)?;
    group_scores_for(dataset, groups, &outcome)
}

/// Same as [`group_scores`] with the outcome supplied as an external bit
/// vector (e.g. classifier predictions).
pub fn group_scores_for(
    dataset: &BinaryDataset,
    groups: &[EGroup],
    outcome: &[u8],
) -> Result<Vec<GroupScore>, MetricsError> {
    if outcome.len() != dataset.n_rows() {
        return Err(MetricsError::LengthMismatch(
            outcome.len(),
            dataset.n_rows(),
        ));
    }
    let mut out = Vec::with_capacity(dataset.schema().protected.len() * groups.len());
    for p_col in &dataset.schema().protected {
        let protected = dataset.column(p_col)?;
        for group in groups {
            let counts = counts_from_bits(outcome, &protected, &group.row_indices);
            let (score, defined) = division_score(&counts);
            out.push(GroupScore {
                protected: p_col.clone(),
                signature: group.signature.clone(),
                score,
                size: group.len(),
                defined,
            });
        }
    }
    Ok(out)
}

/// E-group-size weighted average of the scores of one protected attribute.
pub fn dataset_score(scores_for_one_p: &[GroupScore], total_rows: usize) -> f64 {
    if total_rows == 0 {
        return 0.0;
    }
    scores_for_one_p
        .iter()
        .map(|s| s.score * s.size as f64 / total_rows as f64)
        .sum()
}

/// Maximum absolute per-attribute dataset score.
pub fn overall_score(per_protected: &[(String, f64)]) -> f64 {
    per_protected
        .iter()
        .map(|(_, s)| s.abs())
        .fold(0.0, f64::max)
}

/// Over-limit and worst-group statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OverLimitStats {
    pub ogds: f64,
    pub og_pct: f64,
    pub wgds: f64,
    pub wg_pct: f64,
}

/// Group severity is the max absolute defined score over protected
/// attributes. `ogds` is the unweighted mean severity of groups strictly over
/// `alpha`, `og_pct` their tuple share; `wgds`/`wg_pct` describe the single
/// worst group (first in signature order on ties).
pub fn over_limit_stats(
    scores: &[GroupScore],
    groups: &[EGroup],
    total_rows: usize,
    alpha: f64,
) -> OverLimitStats {
    if groups.is_empty() || total_rows == 0 {
        return OverLimitStats::default();
    }
    let severity: Vec<f64> = groups
        .iter()
        .map(|g| {
            scores
                .iter()
                .filter(|s| s.defined && s.signature == g.signature)
                .map(|s| s.score.abs())
                .fold(0.0, f64::max)
        })
        .collect();

    let mut over_sum = 0.0;
    let mut over_count = 0usize;
    let mut over_rows = 0usize;
    let mut worst = 0usize;
    for (i, (&s, g)) in severity.iter().zip(groups).enumerate() {
        if s > alpha {
            over_sum += s;
            over_count += 1;
            over_rows += g.len();
        }
        if s > severity[worst] {
            worst = i;
        }
    }

    OverLimitStats {
        ogds: if over_count > 0 {
            over_sum / over_count as f64
        } else {
            0.0
        },
        og_pct: over_rows as f64 / total_rows as f64,
        wgds: severity[worst],
        wg_pct: groups[worst].len() as f64 / total_rows as f64,
    }
}

/// Full discrimination picture of one outcome vector over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationReport {
    pub alpha: f64,
    /// Signed per-attribute dataset scores, schema order.
    pub per_protected: Vec<(String, f64)>,
    /// Max absolute per-attribute score.
    pub overall: f64,
    pub per_group: Vec<GroupScore>,
    pub ogds: f64,
    pub og_pct: f64,
    pub wgds: f64,
    pub wg_pct: f64,
}

pub fn discrimination_report(
    dataset: &BinaryDataset,
    groups: &[EGroup],
    outcome: &[u8],
    alpha: f64,
) -> Result<DiscriminationReport, MetricsError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(MetricsError::InvalidAlpha(alpha));
    }
    let per_group = group_scores_for(dataset, groups, outcome)?;
    let per_protected: Vec<(String, f64)> = dataset
        .schema()
        .protected
        .iter()
        .map(|p| {
            let scores: Vec<GroupScore> = per_group
                .iter()
                .filter(|s| &s.protected == p)
                .cloned()
                .collect();
            (p.clone(), dataset_score(&scores, dataset.n_rows()))
        })
        .collect();
    let overall = overall_score(&per_protected);
    let ols = over_limit_stats(&per_group, groups, dataset.n_rows(), alpha);
    Ok(DiscriminationReport {
        alpha,
        per_protected,
        overall,
        per_group,
        ogds: ols.ogds,
        og_pct: ols.og_pct,
        wgds: ols.wgds,
        wg_pct: ols.wg_pct,
    })
}

/// Definition-level labels at a threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetLabel {
    Discriminatory,
    Safe,
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminationLabels {
    /// (protected, group signature) pairs with |score| > alpha.
    pub group_discriminated: Vec<(String, Vec<(String, u8)>)>,
    /// Protected attributes with |dataset score| > alpha.
    pub globally_discriminated: Vec<String>,
    pub dataset: DatasetLabel,
}

pub fn classify_discrimination(report: &DiscriminationReport, alpha: f64) -> DiscriminationLabels {
    let group_discriminated = report
        .per_group
        .iter()
        .filter(|s| s.score.abs() > alpha)
        .map(|s| (s.protected.clone(), s.signature.clone()))
        .collect();
    let globally_discriminated = report
        .per_protected
        .iter()
        .filter(|(_, s)| s.abs() > alpha)
        .map(|(p, _)| p.clone())
        .collect();
    let dataset = if report.overall == 0.0 {
        DatasetLabel::Free
    } else if report.overall > alpha {
        DatasetLabel::Discriminatory
    } else {
        DatasetLabel::Safe
    };
    DiscriminationLabels {
        group_discriminated,
        globally_discriminated,
        dataset,
    }
}

/// Balanced classification rate, misclassification rate and the combined
/// evaluation score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub bcr: f64,
    pub err: f64,
    pub ces: f64,
    /// Set when one class is absent from the actuals and BCR fell back to
    /// the single defined rate.
    pub bcr_degenerate: bool,
}

pub fn accuracy_report(
    actual: &[u8],
    predicted: &[u8],
    disc: &DiscriminationReport,
) -> Result<AccuracyReport, MetricsError> {
    if actual.is_empty() {
        return Err(MetricsError::EmptyLabels);
    }
    if actual.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch(actual.len(), predicted.len()));
    }
    let mut tp = 0u64;
    let mut fn_ = 0u64;
    let mut tn = 0u64;
    let mut fp = 0u64;
    for (&a, &p) in actual.iter().zip(predicted) {
        match (a, p) {
            (1, 1) => tp += 1,
            (1, 0) => fn_ += 1,
            (0, 0) => tn += 1,
            _ => fp += 1,
        }
    }
    let pos = tp + fn_;
    let neg = tn + fp;
    let (bcr, bcr_degenerate) = match (pos, neg) {
        (0, _) => (tn as f64 / neg as f64, true),
        (_, 0) => (tp as f64 / pos as f64, true),
        _ => {
            let tpr = tp as f64 / pos as f64;
            let tnr = tn as f64 / neg as f64;
            ((tpr + tnr) / 2.0, false)
        }
    };
    let total = actual.len() as f64;
    let correct = (tp + tn) as f64;
    let err = 1.0 - correct / total;
    let ces = combined_evaluation_score(disc.overall, disc.ogds, disc.og_pct, disc.wgds,
        disc.wg_pct, err, bcr);
    Ok(AccuracyReport {
        bcr,
        err,
        ces,
        bcr_degenerate,
    })
}

/// `((glbds + ogds*og% + wgds*wg%)/3 + Err) / BCR`; lower is better.
pub fn combined_evaluation_score(
    glbds: f64,
    ogds: f64,
    og_pct: f64,
    wgds: f64,
    wg_pct: f64,
    err: f64,
    bcr: f64,
) -> f64 {
    ((glbds + ogds * og_pct + wgds * wg_pct) / 3.0 + err) / bcr
}

/// Serialize a report (optionally with accuracy) to the wire JSON object.
/// Key order: glbds, ogds, og_pct, wgds, wg_pct, bcr, err, ces,
/// per_protected, per_group; bcr/err are omitted when no accuracy report is
/// given.
pub fn report_json(disc: &DiscriminationReport, acc: Option<&AccuracyReport>) -> Value {
    let mut obj = Map::new();
    obj.insert("glbds".into(), json!(disc.overall));
    obj.insert("ogds".into(), json!(disc.ogds));
    obj.insert("og_pct".into(), json!(disc.og_pct));
    obj.insert("wgds".into(), json!(disc.wgds));
    obj.insert("wg_pct".into(), json!(disc.wg_pct));
    match acc {
        Some(a) => {
            obj.insert("bcr".into(), json!(a.bcr));
            obj.insert("err".into(), json!(a.err));
            obj.insert("ces".into(), json!(a.ces));
        }
        None => {
            // actuals scored against themselves: BCR 1, Err 0
            let ces = combined_evaluation_score(
                disc.overall,
                disc.ogds,
                disc.og_pct,
                disc.wgds,
                disc.wg_pct,
                0.0,
                1.0,
            );
            obj.insert("ces".into(), json!(ces));
        }
    }
    let mut per_p = Map::new();
    for (p, s) in &disc.per_protected {
        per_p.insert(p.clone(), json!(s));
    }
    obj.insert("per_protected".into(), Value::Object(per_p));
    let per_group: Vec<Value> = disc
        .per_group
        .iter()
        .map(|s| {
            let mut sig = Map::new();
            for (col, bit) in &s.signature {
                sig.insert(col.clone(), json!(bit));
            }
            json!({
                "protected": s.protected,
                "signature": Value::Object(sig),
                "score": s.score,
                "size": s.size,
                "defined": s.defined,
            })
        })
        .collect();
    obj.insert("per_group".into(), Value::Array(per_group));
    Value::Object(obj)
}
