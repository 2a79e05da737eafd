//! Minimal logistic-regression baseline so the pipeline runs end to end
//! without external modeling tools. Full-batch gradient descent with step
//! halving, which keeps the training loss non-increasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::tabular::{BinaryDataset, TabularError};

const CLASSIFIER_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("no feature columns given")]
    NoFeatures,
    #[error("epochs must be at least 1")]
    ZeroEpochs,
    #[error("feature column `{0}` is the outcome column")]
    OutcomeAsFeature(String),
    #[error("dataset lacks model feature column `{0}`")]
    MissingFeature(String),
    #[error("unsupported classifier version {0}")]
    VersionMismatch(u64),
    #[error("malformed classifier file: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainStats {
    /// Loss after each epoch; non-increasing by construction.
    pub losses: Vec<f64>,
    pub single_class: bool,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Mean logistic loss, numerically stable for large |z|.
pub fn logistic_loss(x: &[f64], n_features: usize, y: &[u8], w: &[f64], bias: f64) -> f64 {
    let rows = y.len();
    let mut total = 0.0;
    for r in 0..rows {
        let feats = &x[r * n_features..(r + 1) * n_features];
        let z: f64 = feats.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + bias;
        // log(1 + exp(-yz)) with y in {-1, +1}
        let yz = if y[r] == 1 { z } else { -z };
        total += if yz > 0.0 {
            (-yz).exp().ln_1p()
        } else {
            -yz + yz.exp().ln_1p()
        };
    }
    total / rows as f64
}

/// Full-batch gradient of [`logistic_loss`]: ((sigma(z) - y) x, mean).
pub fn logistic_gradient(
    x: &[f64],
    n_features: usize,
    y: &[u8],
    w: &[f64],
    bias: f64,
) -> (Vec<f64>, f64) {
    let rows = y.len();
    let mut grad_w = vec![0.0; n_features];
    let mut grad_b = 0.0;
    for r in 0..rows {
        let feats = &x[r * n_features..(r + 1) * n_features];
        let z: f64 = feats.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + bias;
        let residual = sigmoid(z) - y[r] as f64;
        for (gw, &f) in grad_w.iter_mut().zip(feats) {
            *gw += residual * f;
        }
        grad_b += residual;
    }
    for gw in grad_w.iter_mut() {
        *gw /= rows as f64;
    }
    (grad_w, grad_b / rows as f64)
}

fn feature_matrix(
    dataset: &BinaryDataset,
    feature_cols: &[String],
) -> Result<Vec<f64>, ClassifierError> {
    let idx: Vec<usize> = feature_cols
        .iter()
        .map(|n| {
            dataset
                .column_index(n)
                .ok_or_else(|| ClassifierError::MissingFeature(n.clone()))
        })
        .collect::<Result<_, _>>()?;
    let mut x = Vec::with_capacity(dataset.n_rows() * idx.len());
    for row in 0..dataset.n_rows() {
        for &col in &idx {
            x.push(dataset.value(row, col) as f64);
        }
    }
    Ok(x)
}

/// Deterministic seeded training. A single-class outcome yields the constant
/// predictor (flagged in the stats).
pub fn train(
    dataset: &BinaryDataset,
    feature_cols: &[String],
    outcome_col: &str,
    epochs: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<(LinearModel, TrainStats), ClassifierError> {
    if dataset.n_rows() == 0 {
        return Err(ClassifierError::EmptyDataset);
    }
    if feature_cols.is_empty() {
        return Err(ClassifierError::NoFeatures);
    }
    if epochs == 0 {
        return Err(ClassifierError::ZeroEpochs);
    }
    if feature_cols.iter().any(|c| c == outcome_col) {
        return Err(ClassifierError::OutcomeAsFeature(outcome_col.to_string()));
    }
    let y = dataset.column(outcome_col)?;
    let nf = feature_cols.len();
    let x = feature_matrix(dataset, feature_cols)?;

    let positive = y.iter().filter(|&&v| v == 1).count();
    if positive == 0 || positive == y.len() {
        let bias = if positive == 0 { -16.0 } else { 16.0 };
        let model = LinearModel {
            features: feature_cols.to_vec(),
            weights: vec![0.0; nf],
            bias,
            threshold: 0.5,
        };
        let loss = logistic_loss(&x, nf, &y, &model.weights, model.bias);
        return Ok((
            model,
            TrainStats {
                losses: vec![loss],
                single_class: true,
            },
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: Vec<f64> = (0..nf).map(|_| rng.gen_range(-0.01..0.01)).collect();
    let mut bias = 0.0;
    let mut losses = Vec::with_capacity(epochs);
    let mut current = logistic_loss(&x, nf, &y, &w, bias);
    for _ in 0..epochs {
        let (gw, gb) = logistic_gradient(&x, nf, &y, &w, bias);
        let mut step = learning_rate;
        loop {
            let w_next: Vec<f64> = w.iter().zip(&gw).map(|(wi, gi)| wi - step * gi).collect();
            let b_next = bias - step * gb;
            let next = logistic_loss(&x, nf, &y, &w_next, b_next);
            if next <= current || step < 1e-18 {
                if next <= current {
                    w = w_next;
                    bias = b_next;
                    current = next;
                }
                break;
            }
            step *= 0.5;
        }
        losses.push(current);
    }
    Ok((
        LinearModel {
            features: feature_cols.to_vec(),
            weights: w,
            bias,
            threshold: 0.5,
        },
        TrainStats {
            losses,
            single_class: false,
        },
    ))
}

/// Predict 1 iff sigmoid(w.x + b) >= threshold.
pub fn predict(model: &LinearModel, dataset: &BinaryDataset) -> Result<Vec<u8>, ClassifierError> {
    let x = feature_matrix(dataset, &model.features)?;
    let nf = model.features.len();
    Ok((0..dataset.n_rows())
        .map(|r| {
            let feats = &x[r * nf..(r + 1) * nf];
            let z: f64 =
                feats.iter().zip(&model.weights).map(|(a, b)| a * b).sum::<f64>() + model.bias;
            (sigmoid(z) >= model.threshold) as u8
        })
        .collect())
}

pub fn save_classifier(model: &LinearModel) -> String {
    let file = json!({
        "version": CLASSIFIER_VERSION,
        "features": model.features,
        "weights": model.weights,
        "bias": model.bias,
        "threshold": model.threshold,
    });
    serde_json::to_string_pretty(&file).expect("classifier serializes")
}

pub fn load_classifier(text: &str) -> Result<LinearModel, ClassifierError> {
    let root: Value =
        serde_json::from_str(text).map_err(|e| ClassifierError::Malformed(e.to_string()))?;
    let obj = root
        .as_object()
        .ok_or_else(|| ClassifierError::Malformed("top level is not an object".into()))?;
    let version = obj
        .get("version")
        .and_then(Value::as_u64)
        .ok_or_else(|| ClassifierError::Malformed("missing version".into()))?;
    if version != CLASSIFIER_VERSION {
        return Err(ClassifierError::VersionMismatch(version));
    }
    let features = obj
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| ClassifierError::Malformed("missing features".into()))?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| ClassifierError::Malformed("feature is not a string".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let weights = obj
        .get("weights")
        .and_then(Value::as_array)
        .ok_or_else(|| ClassifierError::Malformed("missing weights".into()))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| ClassifierError::Malformed("weight is not a number".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if weights.len() != features.len() {
        return Err(ClassifierError::Malformed(
            "weight count differs from feature count".into(),
        ));
    }
    let bias = obj
        .get("bias")
        .and_then(Value::as_f64)
        .ok_or_else(|| ClassifierError::Malformed("missing bias".into()))?;
    let threshold = obj
        .get("threshold")
        .and_then(Value::as_f64)
        .ok_or_else(|| ClassifierError::Malformed("missing threshold".into()))?;
    Ok(LinearModel {
        features,
        weights,
        bias,
        threshold,
    })
}
