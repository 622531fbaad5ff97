use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::projection::INIT_NOISE_STD;
use super::{encode, FewShotError, LabeledSet, ProjectionHead, Result};
use crate::embedding::EmbeddingMatrix;
use crate::linalg::{dot, Matrix};

pub const DEFAULT_HEAD_EPOCHS: usize = 100;
pub const DEFAULT_HEAD_LEARNING_RATE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_HEAD_EPOCHS,
            lr: DEFAULT_HEAD_LEARNING_RATE,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression over encoded (projected, unit-length)
/// embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub classes: Vec<String>,
    /// One row per class.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub training_log: Vec<f64>,
    pub config: ClassifierConfig,
}

impl ClassifierHead {
    pub fn dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| dot(self.weights.row(c), x) + self.bias[c])
            .collect()
    }

    pub fn predict_proba(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Mean cross-entropy of `softmax(W x + b)` against integer targets, with
/// gradients for `W` and `b`.
pub fn cross_entropy_loss_and_grad(
    weights: &Matrix,
    bias: &[f64],
    features: &[Vec<f64>],
    targets: &[usize],
) -> (f64, Matrix, Vec<f64>) {
    let k = weights.rows();
    let mut grad_w = Matrix::zeros(k, weights.cols());
    let mut grad_b = vec![0.0; k];
    if features.is_empty() {
        return (0.0, grad_w, grad_b);
    }
    let scale = 1.0 / features.len() as f64;
    let mut loss = 0.0;
    let mut delta = vec![0.0; k];
    for (x, &t) in features.iter().zip(targets) {
        let logits: Vec<f64> = (0..k).map(|c| dot(weights.row(c), x) + bias[c]).collect();
        let probs = softmax(&logits);
        loss -= probs[t].max(f64::MIN_POSITIVE).ln();
        for c in 0..k {
            delta[c] = (probs[c] - if c == t { 1.0 } else { 0.0 }) * scale;
            grad_b[c] += delta[c];
        }
        grad_w.add_outer(1.0, &delta, x);
    }
    (loss * scale, grad_w, grad_b)
}

/// Full-batch gradient descent on cross-entropy over the labeled documents.
pub fn train_classifier(
    labeled: &LabeledSet,
    emb: &EmbeddingMatrix,
    proj: &ProjectionHead,
    config: ClassifierConfig,
) -> Result<ClassifierHead> {
    if labeled.is_empty() {
        return Err(FewShotError::EmptyLabeledSet);
    }
    if emb.dim() != proj.dim() {
        return Err(FewShotError::DimMismatch {
            expected: proj.dim(),
            found: emb.dim(),
        });
    }
    let classes = labeled.classes();
    let class_index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut features = Vec::with_capacity(labeled.len());
    let mut targets = Vec::with_capacity(labeled.len());
    for (id, class) in &labeled.entries {
        let raw = emb
            .get(id)
            .ok_or_else(|| FewShotError::MissingEmbedding(id.clone()))?;
        features.push(encode(proj, raw));
        targets.push(class_index[class.as_str()]);
    }

    let dim = emb.dim();
    let k = classes.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, INIT_NOISE_STD).expect("valid std");
    let mut weights = Matrix::zeros(k, dim);
    for w in weights.as_mut_slice() {
        *w = noise.sample(&mut rng);
    }
    let mut bias = vec![0.0; k];

    let mut training_log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, gw, gb) = cross_entropy_loss_and_grad(&weights, &bias, &features, &targets);
        training_log.push(loss);
        for (w, g) in weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *w -= config.lr * g;
        }
        for (b, g) in bias.iter_mut().zip(&gb) {
            *b -= config.lr * g;
        }
        if !weights.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(FewShotError::Diverged(epoch));
        }
    }
    Ok(ClassifierHead {
        classes,
        weights,
        bias,
        training_log,
        config,
    })
}
