//! Classifier-agnostic post-processing for group discrimination in binary
//! predictions: measure discrimination stratified by explanatory attributes,
//! then remove it by solving one convex quadratic program per stratum and
//! applying seeded stochastic prediction flips that satisfy the constraints
//! of every protected attribute simultaneously.

// index loops over several lockstep arrays read better than zip chains in
// the numeric kernels
#![allow(clippy::needless_range_loop)]

pub mod adjuster;
pub mod classifier;
pub mod divisions;
pub mod metrics;
pub mod oracle;
pub mod qp;
pub mod synth;
pub mod tabular;

pub use adjuster::{
    adjust_batch, adjust_prediction, assemble_problem, build_model, expected_scores,
    lemma_fallback, load_model, plan_entries, save_model, AdjustCounters, AdjustError,
    AdjustOutcome, AdjustParams, AdjustmentEntry, FairModel, FlipPlan, GroupModel,
    ObjectiveVariant,
};
pub use classifier::{
    load_classifier, predict, save_classifier, train, ClassifierError, LinearModel, TrainStats,
};
pub use divisions::{
    build_division_table, counterpart, p_value_of_division, run_length, DivisionError,
    DivisionTable,
};
pub use metrics::{
    accuracy_report, classify_discrimination, dataset_score, discrimination_report,
    division_score, group_scores, over_limit_stats, overall_score, report_json, AccuracyReport,
    DatasetLabel, DiscriminationReport, GroupScore, MetricsError,
};
pub use qp::{
    feasible_point, kkt_residual, solve_qp, solve_qp_from, QpError, QpProblem, QpSolution,
    QpStatus,
};
pub use tabular::{
    combine_protected, counts_table, load_dataset, stratify, BinaryDataset, CountsTable, EGroup,
    Schema, TabularError,
};
