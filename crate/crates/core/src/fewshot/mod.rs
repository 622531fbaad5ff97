//! Few-shot training: labeled-set sampling, contrastive pairs, the
//! projection head, the softmax classification head and prediction.

mod classifier;
mod io;
mod pairs;
mod projection;

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::embedding::EmbeddingMatrix;
use crate::linalg::normalized;
use crate::topics::ClusterAssignment;

pub use classifier::{
    cross_entropy_loss_and_grad, softmax, train_classifier, ClassifierConfig, ClassifierHead,
};
pub use io::{read_head_header, HeadHeader};
pub use pairs::{build_pairs, cross_pair_bound, pair_count, ContrastivePair, PairMode, PairPlan};
pub use projection::{
    contrastive_loss_and_grad, train_projection, ProjectionConfig, ProjectionHead,
};

/// Default number of contrastive pairs built per labeled sample.
pub const DEFAULT_PAIRS_PER_SAMPLE: usize = 10;
pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_LEARNING_RATE: f64 = 2e-5;

#[derive(Debug, Error)]
pub enum FewShotError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("corpus carries no true labels")]
    NoLabels,
    #[error("class {class:?} has {available} labeled documents, {requested} requested")]
    InsufficientClassSize {
        class: String,
        available: usize,
        requested: usize,
    },
    #[error("{requested} draws requested but only {available} labeled documents exist")]
    TooFewLabeled { requested: usize, available: usize },
    #[error("sample size must be positive")]
    ZeroSampleSize,
    #[error("contrastive pairs need at least two classes, found {0}")]
    SingleClass(usize),
    #[error("pairs-per-sample cap must be at least 1")]
    ZeroCap,
    #[error("no contrastive pairs to train on")]
    EmptyPairs,
    #[error("labeled set is empty")]
    EmptyLabeledSet,
    #[error("no embedding for document {0:?}")]
    MissingEmbedding(String),
    #[error("dimension mismatch: head expects {expected}, embeddings have {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("training diverged: non-finite weights after epoch {0}")]
    Diverged(usize),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, FewShotError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// `n` documents drawn from every class.
    PerClass(usize),
    /// `i` documents drawn from the whole labeled corpus, ignoring classes.
    RandomDraw(usize),
    /// Labels supplied from a file.
    Given,
}

/// Labeled training documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledSet {
    pub entries: Vec<(String, String)>,
    pub mode: SamplingMode,
    pub seed: u64,
}

impl LabeledSet {
    /// Distinct class names in the set, sorted.
    pub fn classes(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.entries.iter().map(|(_, c)| c.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label_of(&self, id: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(i, _)| i == id)
            .map(|(_, c)| c.as_str())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (id, label) in &self.entries {
            let rec = LabeledRecord {
                id: id.clone(),
                label: label.clone(),
            };
            serde_json::to_writer(&mut out, &rec).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: LabeledRecord =
                serde_json::from_str(&line).map_err(|e| FewShotError::Malformed {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            if !seen.insert(rec.id.clone()) {
                return Err(FewShotError::Malformed {
                    line: i + 1,
                    message: format!("duplicate id {:?}", rec.id),
                });
            }
            entries.push((rec.id, rec.label));
        }
        if entries.is_empty() {
            return Err(FewShotError::EmptyLabeledSet);
        }
        Ok(Self {
            entries,
            mode: SamplingMode::Given,
            seed: 0,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(fs::File::open(path)?)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LabeledRecord {
    id: String,
    label: String,
}

/// Draws `n` documents per class uniformly without replacement.
pub fn sample_per_class(corpus: &Corpus, n: usize, seed: u64) -> Result<LabeledSet> {
    if n == 0 {
        return Err(FewShotError::ZeroSampleSize);
    }
    let classes = corpus.class_names.as_ref().ok_or(FewShotError::NoLabels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = Vec::with_capacity(n * classes.len());
    for class in classes {
        let mut members: Vec<usize> = corpus
            .documents
            .iter()
            .enumerate()
            .filter(|(_, d)| d.true_label.as_deref() == Some(class.as_str()))
            .map(|(i, _)| i)
            .collect();
        if members.len() < n {
            return Err(FewShotError::InsufficientClassSize {
                class: class.clone(),
                available: members.len(),
                requested: n,
            });
        }
        let (chosen, _) = members.partial_shuffle(&mut rng, n);
        picked.extend_from_slice(chosen);
    }
    Ok(LabeledSet {
        entries: entries_in_corpus_order(corpus, picked),
        mode: SamplingMode::PerClass(n),
        seed,
    })
}

/// Draws `i` labeled documents uniformly without replacement, regardless of
/// class. The resulting class set may be smaller than the corpus's.
pub fn sample_random_draw(corpus: &Corpus, i: usize, seed: u64) -> Result<LabeledSet> {
    if i == 0 {
        return Err(FewShotError::ZeroSampleSize);
    }
    let mut labeled: Vec<usize> = corpus
        .documents
        .iter()
        .enumerate()
        .filter(|(_, d)| d.true_label.is_some())
        .map(|(idx, _)| idx)
        .collect();
    if labeled.is_empty() {
        return Err(FewShotError::NoLabels);
    }
    if i > labeled.len() {
        return Err(FewShotError::TooFewLabeled {
            requested: i,
            available: labeled.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (chosen, _) = labeled.partial_shuffle(&mut rng, i);
    let chosen = chosen.to_vec();
    Ok(LabeledSet {
        entries: entries_in_corpus_order(corpus, chosen),
        mode: SamplingMode::RandomDraw(i),
        seed,
    })
}

fn entries_in_corpus_order(corpus: &Corpus, mut picked: Vec<usize>) -> Vec<(String, String)> {
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| {
            let d = &corpus.documents[i];
            (d.id.clone(), d.true_label.clone().unwrap_or_default())
        })
        .collect()
}

/// Classifier input for a raw document embedding: the projected vector
/// scaled to unit length.
pub fn encode(proj: &ProjectionHead, raw: &[f64]) -> Vec<f64> {
    normalized(&proj.apply(raw))
}

/// Assigns every corpus document to its highest-probability class.
///
/// Documents in `labeled` keep their given label. Ties go to the class that
/// comes first in `head.classes`.
pub fn predict(
    corpus: &Corpus,
    emb: &EmbeddingMatrix,
    proj: &ProjectionHead,
    head: &ClassifierHead,
    labeled: Option<&LabeledSet>,
) -> Result<ClusterAssignment> {
    if emb.dim() != proj.dim() {
        return Err(FewShotError::DimMismatch {
            expected: proj.dim(),
            found: emb.dim(),
        });
    }
    let given: HashMap<&str, &str> = labeled
        .map(|l| {
            l.entries
                .iter()
                .map(|(i, c)| (i.as_str(), c.as_str()))
                .collect()
        })
        .unwrap_or_default();
    let mut assignment = Vec::with_capacity(corpus.len());
    for doc in &corpus.documents {
        let class = match given.get(doc.id.as_str()) {
            Some(c) => c.to_string(),
            None => {
                let raw = emb
                    .get(&doc.id)
                    .ok_or_else(|| FewShotError::MissingEmbedding(doc.id.clone()))?;
                let probs = head.predict_proba(&encode(proj, raw));
                head.classes[argmax(&probs)].clone()
            }
        };
        assignment.push((doc.id.clone(), class));
    }
    let mut classes = head.classes.clone();
    for c in given.values() {
        if !classes.iter().any(|k| k == c) {
            classes.push(c.to_string());
        }
    }
    let fixed = given.keys().map(|s| s.to_string()).collect();
    Ok(ClusterAssignment::new(assignment, classes, fixed))
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
