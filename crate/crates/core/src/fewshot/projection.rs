use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ContrastivePair, FewShotError, Result, DEFAULT_EPOCHS, DEFAULT_LEARNING_RATE};
use crate::embedding::EmbeddingMatrix;
use crate::linalg::{dot, norm, Matrix, NORM_EPS};

/// Standard deviation of the seeded perturbation added to the identity
/// when a projection is initialized.
pub const INIT_NOISE_STD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            lr: DEFAULT_LEARNING_RATE,
            seed: 0,
        }
    }
}

/// Square linear map applied to frozen document embeddings, trained so that
/// cosine similarity of projected pairs tracks their same-class label.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    pub weight: Matrix,
    /// Mean pair loss at the start of each epoch.
    pub training_log: Vec<f64>,
    pub config: ProjectionConfig,
}

impl ProjectionHead {
    pub fn identity(dim: usize) -> Self {
        Self {
            weight: Matrix::identity(dim),
            training_log: Vec::new(),
            config: ProjectionConfig {
                epochs: 0,
                ..ProjectionConfig::default()
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weight.matvec(x)
    }
}

// d cos(u, v) / du with the norm guard: a clamped norm is a constant
fn cosine_grad_wrt_first(u: &[f64], v: &[f64], nu: f64, nv: f64, cos: f64, clamped: bool) -> Vec<f64> {
    u.iter()
        .zip(v)
        .map(|(&ui, &vi)| {
            let g = vi / (nu * nv);
            if clamped {
                g
            } else {
                g - cos * ui / (nu * nu)
            }
        })
        .collect()
}

/// Mean squared error between `cos(W a, W b)` and each pair's label, and
/// its gradient with respect to `W`.
pub fn contrastive_loss_and_grad(weight: &Matrix, pairs: &[(&[f64], &[f64], f64)]) -> (f64, Matrix) {
    let mut grad = Matrix::zeros(weight.rows(), weight.cols());
    if pairs.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut loss = 0.0;
    for &(a, b, label) in pairs {
        let u = weight.matvec(a);
        let v = weight.matvec(b);
        let (ru, rv) = (norm(&u), norm(&v));
        let (nu, nv) = (ru.max(NORM_EPS), rv.max(NORM_EPS));
        let cos = dot(&u, &v) / (nu * nv);
        let resid = cos - label;
        loss += resid * resid;
        let dcos = 2.0 * resid * scale;
        let du = cosine_grad_wrt_first(&u, &v, nu, nv, cos, ru < NORM_EPS);
        let dv = cosine_grad_wrt_first(&v, &u, nv, nu, cos, rv < NORM_EPS);
        grad.add_outer(dcos, &du, a);
        grad.add_outer(dcos, &dv, b);
    }
    (loss * scale, grad)
}

/// Full-batch gradient descent on the pair loss, starting from the identity
/// plus seeded noise.
pub fn train_projection(
    pairs: &[ContrastivePair],
    emb: &EmbeddingMatrix,
    config: ProjectionConfig,
) -> Result<ProjectionHead> {
    if pairs.is_empty() {
        return Err(FewShotError::EmptyPairs);
    }
    let lookup = |id: &str| {
        emb.get(id)
            .ok_or_else(|| FewShotError::MissingEmbedding(id.to_owned()))
    };
    let resolved: Vec<(&[f64], &[f64], f64)> = pairs
        .iter()
        .map(|p| Ok((lookup(&p.id_a)?, lookup(&p.id_b)?, p.label)))
        .collect::<Result<_>>()?;

    let dim = emb.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, INIT_NOISE_STD).expect("valid std");
    let mut weight = Matrix::identity(dim);
    for w in weight.as_mut_slice() {
        *w += noise.sample(&mut rng);
    }

    let mut training_log = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad) = contrastive_loss_and_grad(&weight, &resolved);
        training_log.push(loss);
        for (w, g) in weight.as_mut_slice().iter_mut().zip(grad.as_slice()) {
            *w -= config.lr * g;
        }
        if !weight.is_finite() {
            return Err(FewShotError::Diverged(epoch));
        }
    }
    Ok(ProjectionHead {
        weight,
        training_log,
        config,
    })
}
