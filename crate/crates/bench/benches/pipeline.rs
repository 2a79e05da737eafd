use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fairpost::adjuster::{adjust_batch, build_model, AdjustParams, ObjectiveVariant};
use fairpost::classifier::{predict, train};
use fairpost::metrics::discrimination_report;
use fairpost::synth::credit_dataset;
use fairpost::tabular::stratify;

fn bench_stratify_and_score(c: &mut Criterion) {
    let ds = credit_dataset(10_000, 3);
    let outcome = ds.column(&ds.schema().outcome).unwrap();
    c.bench_function("stratify_10k", |b| b.iter(|| stratify(black_box(&ds))));
    let groups = stratify(&ds);
    c.bench_function("discrimination_report_10k", |b| {
        b.iter(|| discrimination_report(black_box(&ds), &groups, &outcome, 0.05).unwrap())
    });
}

fn bench_build_and_adjust(c: &mut Criterion) {
    let ds = credit_dataset(10_000, 3);
    let outcome = ds.schema().outcome.clone();
    let features: Vec<String> = ds
        .columns()
        .iter()
        .filter(|c| **c != outcome)
        .cloned()
        .collect();
    let (clf, _) = train(&ds, &features, &outcome, 100, 1.0, 3).unwrap();
    let predictions = predict(&clf, &ds).unwrap();
    let params = AdjustParams::new(0.05, ObjectiveVariant::Norm, 3);
    c.bench_function("build_model_10k", |b| {
        b.iter(|| build_model(black_box(&ds), &predictions, &params).unwrap())
    });
    let model = build_model(&ds, &predictions, &params).unwrap();
    c.bench_function("adjust_batch_10k", |b| {
        b.iter(|| adjust_batch(black_box(&model), &ds, &predictions, 42).unwrap())
    });
}

criterion_group!(benches, bench_stratify_and_score, bench_build_and_adjust);
criterion_main!(benches);
