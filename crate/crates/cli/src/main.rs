//! Command-line pipeline: audit discrimination, train the baseline
//! classifier, predict, build the adjustment model, apply it, and evaluate.
//!
//! Exit codes: 0 success (audit: discrimination-safe), 1 usage or I/O
//! error, 2 solver failure, 3 audit found discrimination.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use fairpost::adjuster::{
    adjust_batch, build_model, load_model, save_model, AdjustError, AdjustParams, FairModel,
    ObjectiveVariant,
};
use fairpost::classifier::{load_classifier, predict, save_classifier, train};
use fairpost::metrics::{
    accuracy_report, discrimination_report, report_json, AccuracyReport, DiscriminationReport,
};
use fairpost::tabular::{load_dataset, stratify, BinaryDataset, Schema};

#[derive(Parser)]
#[command(
    name = "fairpost",
    version,
    about = "Audit group discrimination in binary predictions and remove it by post-processing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    Norm,
    Errc,
    Chg,
}

impl From<Objective> for ObjectiveVariant {
    fn from(o: Objective) -> Self {
        match o {
            Objective::Norm => ObjectiveVariant::Norm,
            Objective::Errc => ObjectiveVariant::Errc,
            Objective::Chg => ObjectiveVariant::Chg,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Score the actual outcomes of a dataset against a threshold
    Audit {
        data: PathBuf,
        schema: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// Report JSON destination
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Fit the built-in logistic baseline
    TrainClassifier {
        data: PathBuf,
        schema: PathBuf,
        /// Feature columns, comma separated (default: all non-outcome)
        #[arg(long)]
        features: Option<String>,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "classifier.json")]
        out: PathBuf,
    },
    /// Emit predictions (header `dhat`) for a dataset
    Predict {
        data: PathBuf,
        schema: PathBuf,
        classifier: PathBuf,
        #[arg(long, default_value = "predictions.csv")]
        out: PathBuf,
    },
    /// Solve the per-stratum flip problems and write the adjustment model
    BuildModel {
        data: PathBuf,
        predictions: PathBuf,
        schema: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Objective::Norm)]
        objective: Objective,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        min_group_size: usize,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
    },
    /// Apply an adjustment model to predictions (writes header `dfinal`)
    Adjust {
        data: PathBuf,
        predictions: PathBuf,
        model: PathBuf,
        schema: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "adjusted.csv")]
        out: PathBuf,
    },
    /// Compare original outcomes, raw predictions and adjusted predictions
    Evaluate {
        data: PathBuf,
        predictions: PathBuf,
        adjusted: PathBuf,
        schema: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// train -> predict -> build -> adjust -> evaluate, writing all artifacts
    Pipeline {
        data: PathBuf,
        schema: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = Objective::Norm)]
        objective: Objective,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        min_group_size: usize,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        learning_rate: f64,
        #[arg(long, default_value = "out")]
        outdir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success status
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(adjust) = cause.downcast_ref::<AdjustError>() {
            if matches!(
                adjust,
                AdjustError::GroupSolveFailed { .. } | AdjustError::ConstraintCheckFailed { .. }
            ) {
                return 2;
            }
        }
    }
    1
}

fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Audit {
            data,
            schema,
            alpha,
            out,
        } => cmd_audit(&data, &schema, alpha, &out),
        Command::TrainClassifier {
            data,
            schema,
            features,
            epochs,
            learning_rate,
            seed,
            out,
        } => cmd_train(&data, &schema, features.as_deref(), epochs, learning_rate, seed, &out),
        Command::Predict {
            data,
            schema,
            classifier,
            out,
        } => cmd_predict(&data, &schema, &classifier, &out),
        Command::BuildModel {
            data,
            predictions,
            schema,
            alpha,
            objective,
            seed,
            min_group_size,
            out,
        } => cmd_build_model(
            &data,
            &predictions,
            &schema,
            alpha,
            objective.into(),
            seed,
            min_group_size,
            &out,
        ),
        Command::Adjust {
            data,
            predictions,
            model,
            schema,
            seed,
            out,
        } => cmd_adjust(&data, &predictions, &model, &schema, seed, &out),
        Command::Evaluate {
            data,
            predictions,
            adjusted,
            schema,
            alpha,
            out,
        } => cmd_evaluate(&data, &predictions, &adjusted, &schema, alpha, out.as_deref()),
        Command::Pipeline {
            data,
            schema,
            alpha,
            objective,
            seed,
            min_group_size,
            epochs,
            learning_rate,
            outdir,
        } => cmd_pipeline(
            &data,
            &schema,
            alpha,
            objective.into(),
            seed,
            min_group_size,
            epochs,
            learning_rate,
            &outdir,
        ),
    }
}

// ---------------------------------------------------------------------------
// shared I/O

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_inputs(data: &Path, schema: &Path) -> Result<BinaryDataset> {
    let schema_text = read_text(schema)?;
    let schema = Schema::from_json(&schema_text)
        .with_context(|| format!("parsing schema {}", schema.display()))?;
    let csv_text = read_text(data)?;
    load_dataset(&csv_text, schema).with_context(|| format!("parsing {}", data.display()))
}

/// Single-column prediction CSV with a mandatory header.
fn read_bits(path: &Path, header: &str) -> Result<Vec<u8>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == header => {}
        Some(h) => bail!(
            "{}: expected header `{header}`, found `{}`",
            path.display(),
            h.trim()
        ),
        None => bail!("{}: empty file", path.display()),
    }
    let mut bits = Vec::new();
    for (i, line) in lines.enumerate() {
        match line.trim() {
            "" => continue,
            "0" => bits.push(0),
            "1" => bits.push(1),
            other => bail!("{}: non-binary value `{other}` at line {}", path.display(), i + 2),
        }
    }
    Ok(bits)
}

fn write_bits(path: &Path, header: &str, bits: &[u8]) -> Result<()> {
    let mut text = String::with_capacity(bits.len() * 2 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for &b in bits {
        text.push(if b == 1 { '1' } else { '0' });
        text.push('\n');
    }
    write_text(path, &text)
}

fn check_alignment(dataset: &BinaryDataset, bits: &[u8], what: &str) -> Result<()> {
    if bits.len() != dataset.n_rows() {
        bail!(
            "{what} has {} rows, dataset has {}",
            bits.len(),
            dataset.n_rows()
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report rendering

fn print_report_row(label: &str, disc: &DiscriminationReport, acc: Option<&AccuracyReport>) {
    let (bcr, err, ces) = match acc {
        Some(a) => (format!("{:.4}", a.bcr), format!("{:.4}", a.err), a.ces),
        None => {
            let ces = fairpost::metrics::combined_evaluation_score(
                disc.overall,
                disc.ogds,
                disc.og_pct,
                disc.wgds,
                disc.wg_pct,
                0.0,
                1.0,
            );
            ("-".into(), "-".into(), ces)
        }
    };
    println!(
        "{label:<4} {:>8.4} {:>8.4} {:>7.2} {:>8.4} {:>7.2} {:>7} {:>7} {:>8.4}",
        disc.overall,
        disc.ogds,
        disc.og_pct * 100.0,
        disc.wgds,
        disc.wg_pct * 100.0,
        bcr,
        err,
        ces
    );
}

fn print_report_header() {
    println!(
        "{:<4} {:>8} {:>8} {:>7} {:>8} {:>7} {:>7} {:>7} {:>8}",
        "", "glbds", "ogds", "og%", "wgds", "wg%", "BCR", "Err", "ces"
    );
}

// ---------------------------------------------------------------------------
// commands

fn cmd_audit(data: &Path, schema: &Path, alpha: f64, out: &Path) -> Result<u8> {
    let dataset = load_inputs(data, schema)?;
    let groups = stratify(&dataset);
    let outcome = dataset.column(&dataset.schema().outcome)?;
    let report = discrimination_report(&dataset, &groups, &outcome, alpha)?;

    println!("discrimination audit (alpha = {alpha})");
    print_report_header();
    print_report_row("", &report, None);
    println!();
    for (p, score) in &report.per_protected {
        let flag = if score.abs() > alpha { "  over limit" } else { "" };
        println!("  {p:<20} {score:>8.4}{flag}");
    }
    let over: Vec<&fairpost::metrics::GroupScore> = report
        .per_group
        .iter()
        .filter(|s| s.score.abs() > alpha)
        .collect();
    if !over.is_empty() {
        println!("  {} group score(s) over the limit", over.len());
    }

    write_text(out, &serde_json::to_string_pretty(&report_json(&report, None))?)?;

    let discriminatory = report.overall > alpha;
    println!(
        "\ndataset is {}",
        if report.overall == 0.0 {
            "discrimination-free"
        } else if discriminatory {
            "discriminatory"
        } else {
            "discrimination-safe"
        }
    );
    Ok(if discriminatory { 3 } else { 0 })
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: &Path,
    schema: &Path,
    features: Option<&str>,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
    out: &Path,
) -> Result<u8> {
    let dataset = load_inputs(data, schema)?;
    let outcome = dataset.schema().outcome.clone();
    let feature_cols: Vec<String> = match features {
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
        None => dataset
            .columns()
            .iter()
            .filter(|c| **c != outcome)
            .cloned()
            .collect(),
    };
    let (model, stats) = train(&dataset, &feature_cols, &outcome, epochs, learning_rate, seed)?;
    if stats.single_class {
        eprintln!("warning: outcome column has a single class; fitted the constant predictor");
    }
    if let Some(loss) = stats.losses.last() {
        println!("trained on {} rows, final loss {loss:.6}", dataset.n_rows());
    }
    write_text(out, &save_classifier(&model))?;
    Ok(0)
}

fn cmd_predict(data: &Path, schema: &Path, classifier: &Path, out: &Path) -> Result<u8> {
    let dataset = load_inputs(data, schema)?;
    let model = load_classifier(&read_text(classifier)?)?;
    let predictions = predict(&model, &dataset)?;
    write_bits(out, "dhat", &predictions)?;
    let positive = predictions.iter().filter(|&&b| b == 1).count();
    println!(
        "wrote {} predictions ({} positive) to {}",
        predictions.len(),
        positive,
        out.display()
    );
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_build_model(
    data: &Path,
    predictions_path: &Path,
    schema: &Path,
    alpha: f64,
    variant: ObjectiveVariant,
    seed: u64,
    min_group_size: usize,
    out: &Path,
) -> Result<u8> {
    let dataset = load_inputs(data, schema)?;
    let predictions = read_bits(predictions_path, "dhat")?;
    check_alignment(&dataset, &predictions, "predictions")?;
    let params = AdjustParams {
        alpha,
        variant,
        seed,
        min_group_size,
    };
    let model = build_model(&dataset, &predictions, &params)?;
    print_diagnostics(&model);
    write_text(out, &save_model(&model))?;
    println!("model written to {}", out.display());
    Ok(0)
}

fn print_diagnostics(model: &FairModel) {
    println!("solved {} E-group(s)", model.diagnostics.len());
    for diag in &model.diagnostics {
        let sig = if diag.signature.is_empty() {
            "<all rows>".to_string()
        } else {
            diag.signature
                .iter()
                .map(|(c, b)| format!("{c}={b}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let scores = diag
            .expected_scores
            .iter()
            .map(|(p, s)| match s {
                Some(v) => format!("{p}={v:+.4}"),
                None => format!("{p}=n/a"),
            })
            .collect::<Vec<_>>()
            .join(" ");
        let note = if diag.skipped_min_size { " (skipped: below min size)" } else { "" };
        println!(
            "  {sig:<24} size {:>6} {:?} expected {scores}{note}",
            diag.size, diag.status
        );
    }
}

fn cmd_adjust(
    data: &Path,
    predictions_path: &Path,
    model_path: &Path,
    schema: &Path,
    seed: u64,
    out: &Path,
) -> Result<u8> {
    let dataset = load_inputs(data, schema)?;
    let predictions = read_bits(predictions_path, "dhat")?;
    check_alignment(&dataset, &predictions, "predictions")?;
    let model = load_model(&read_text(model_path)?)?;
    let (adjusted, counters) = adjust_batch(&model, &dataset, &predictions, seed)?;
    write_bits(out, "dfinal", &adjusted)?;
    println!(
        "{{\"flips\": {}, \"pass_throughs\": {}, \"rows\": {}}}",
        counters.flips, counters.pass_throughs, counters.rows
    );
    Ok(0)
}

fn cmd_evaluate(
    data: &Path,
    predictions_path: &Path,
    adjusted_path: &Path,
    schema: &Path,
    alpha: f64,
    out: Option<&Path>,
) -> Result<u8> {
    let dataset = load_inputs(data, schema)?;
    let predictions = read_bits(predictions_path, "dhat")?;
    let adjusted = read_bits(adjusted_path, "dfinal")?;
    check_alignment(&dataset, &predictions, "predictions")?;
    check_alignment(&dataset, &adjusted, "adjusted predictions")?;

    let groups = stratify(&dataset);
    let actual = dataset.column(&dataset.schema().outcome)?;

    let ori = discrimination_report(&dataset, &groups, &actual, alpha)?;
    let prd = discrimination_report(&dataset, &groups, &predictions, alpha)?;
    let prd_acc = accuracy_report(&actual, &predictions, &prd)?;
    let adj = discrimination_report(&dataset, &groups, &adjusted, alpha)?;
    let adj_acc = accuracy_report(&actual, &adjusted, &adj)?;

    println!("evaluation (alpha = {alpha})");
    print_report_header();
    print_report_row("Ori", &ori, None);
    print_report_row("Prd", &prd, Some(&prd_acc));
    print_report_row("Adj", &adj, Some(&adj_acc));

    let report = json!({
        "alpha": alpha,
        "ori": report_json(&ori, None),
        "prd": report_json(&prd, Some(&prd_acc)),
        "adj": report_json(&adj, Some(&adj_acc)),
    });
    let text = serde_json::to_string_pretty(&report)?;
    if let Some(path) = out {
        write_text(path, &text)?;
    }
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_pipeline(
    data: &Path,
    schema: &Path,
    alpha: f64,
    variant: ObjectiveVariant,
    seed: u64,
    min_group_size: usize,
    epochs: usize,
    learning_rate: f64,
    outdir: &Path,
) -> Result<u8> {
    fs::create_dir_all(outdir).with_context(|| format!("creating {}", outdir.display()))?;
    let dataset = load_inputs(data, schema)?;
    let outcome = dataset.schema().outcome.clone();

    let feature_cols: Vec<String> = dataset
        .columns()
        .iter()
        .filter(|c| **c != outcome)
        .cloned()
        .collect();
    let (clf, stats) = train(&dataset, &feature_cols, &outcome, epochs, learning_rate, seed)?;
    if stats.single_class {
        eprintln!("warning: outcome column has a single class; fitted the constant predictor");
    }
    write_text(&outdir.join("classifier.json"), &save_classifier(&clf))?;

    let predictions = predict(&clf, &dataset)?;
    write_bits(&outdir.join("predictions.csv"), "dhat", &predictions)?;

    let params = AdjustParams {
        alpha,
        variant,
        seed,
        min_group_size,
    };
    let model = build_model(&dataset, &predictions, &params)?;
    print_diagnostics(&model);
    write_text(&outdir.join("model.json"), &save_model(&model))?;

    let (adjusted, counters) = adjust_batch(&model, &dataset, &predictions, seed)?;
    write_bits(&outdir.join("adjusted.csv"), "dfinal", &adjusted)?;
    println!(
        "adjusted: {} flips, {} pass-throughs over {} rows",
        counters.flips, counters.pass_throughs, counters.rows
    );

    let groups = stratify(&dataset);
    let actual = dataset.column(&outcome)?;
    let ori = discrimination_report(&dataset, &groups, &actual, alpha)?;
    let prd = discrimination_report(&dataset, &groups, &predictions, alpha)?;
    let prd_acc = accuracy_report(&actual, &predictions, &prd)?;
    let adj = discrimination_report(&dataset, &groups, &adjusted, alpha)?;
    let adj_acc = accuracy_report(&actual, &adjusted, &adj)?;

    print_report_header();
    print_report_row("Ori", &ori, None);
    print_report_row("Prd", &prd, Some(&prd_acc));
    print_report_row("Adj", &adj, Some(&adj_acc));

    let report = json!({
        "alpha": alpha,
        "ori": report_json(&ori, None),
        "prd": report_json(&prd, Some(&prd_acc)),
        "adj": report_json(&adj, Some(&adj_acc)),
    });
    write_text(
        &outdir.join("report.json"),
        &serde_json::to_string_pretty(&report)?,
    )?;
    Ok(0)
}
