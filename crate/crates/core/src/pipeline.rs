//! End-to-end runs: sample → pairs → projection → classifier → predict →
//! extract → evaluate, repeated with seeds `seed, seed + 1, ...`.
//!
//! Output bundle layout:
//!
//! ```text
//! <output_dir>/config.json
//! <output_dir>/aggregate.json
//! <output_dir>/run_<k>/{labeled.jsonl, topics.json, topics.txt,
//!                       coherence.json, coherence_top.json,
//!                       accuracy.json, distribution.csv}
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Corpus, CorpusError, Stopwords};
use crate::embedding::{self, AlignmentReport, EmbeddingError, EmbeddingMatrix, WordEmbeddingMatrix};
use crate::eval::{
    self, Aggregation, CoherenceConfig, CoherenceReport, DistributionComparison, EvalError,
    ReferenceStats,
};
use crate::fewshot::{
    self, ClassifierConfig, FewShotError, LabeledSet, PairMode, ProjectionConfig, ProjectionHead,
};
use crate::topics::{self, ClusterAssignment, TopicError, TopicSet};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("corpus and embeddings do not align ({} missing, {} extra)", .0.missing.len(), .0.extra.len())]
    Alignment(AlignmentReport),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    FewShot(#[from] FewShotError),
    #[error(transparent)]
    Topic(#[from] TopicError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl PipelineError {
    /// Short machine-readable category for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Alignment(_) => "alignment",
            Self::Corpus(_) => "corpus",
            Self::Embedding(_) => "embedding",
            Self::FewShot(_) => "fewshot",
            Self::Topic(_) => "topics",
            Self::Eval(_) => "eval",
            Self::Io(_) => "io",
            Self::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    PerClass(usize),
    RandomDraw(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extraction {
    #[default]
    Tfidf,
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_path: PathBuf,
    pub embeddings_path: PathBuf,
    pub word_embeddings_path: Option<PathBuf>,
    /// Replaces the bundled stopword list.
    pub stopwords_path: Option<PathBuf>,
    pub mode: LabelMode,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub pairs_per_sample: usize,
    pub pair_mode: PairMode,
    pub head_epochs: usize,
    pub head_lr: f64,
    pub top_j: usize,
    pub coherence_n: usize,
    pub aggregation: Aggregation,
    pub extraction: Extraction,
    pub runs: usize,
    /// Share of most coherent topics kept for the filtered coherence score.
    pub top_fraction: f64,
    /// Drop corpus documents without embeddings instead of refusing to run.
    pub drop_unmatched: bool,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            corpus_path: PathBuf::new(),
            embeddings_path: PathBuf::new(),
            word_embeddings_path: None,
            stopwords_path: None,
            mode: LabelMode::PerClass(1),
            seed: 0,
            epochs: fewshot::DEFAULT_EPOCHS,
            lr: fewshot::DEFAULT_LEARNING_RATE,
            pairs_per_sample: fewshot::DEFAULT_PAIRS_PER_SAMPLE,
            pair_mode: PairMode::Mixed,
            head_epochs: ClassifierConfig::default().epochs,
            head_lr: ClassifierConfig::default().lr,
            top_j: topics::DEFAULT_TOP_J,
            coherence_n: eval::DEFAULT_TOP_N_WORDS,
            aggregation: Aggregation::Mean,
            extraction: Extraction::Tfidf,
            runs: 5,
            top_fraction: 0.5,
            drop_unmatched: false,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(PipelineError::Config(m.to_owned()));
        match self.mode {
            LabelMode::PerClass(0) | LabelMode::RandomDraw(0) => return fail("sample size must be positive"),
            _ => {}
        }
        if self.epochs == 0 || self.head_epochs == 0 {
            return fail("epochs must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.head_lr > 0.0 && self.head_lr.is_finite()) {
            return fail("learning rates must be positive");
        }
        if self.pairs_per_sample == 0 || self.top_j == 0 || self.runs == 0 {
            return fail("pairs_per_sample, top_j and runs must be positive");
        }
        if self.coherence_n < 2 {
            return fail("coherence_n must be at least 2");
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return fail("top_fraction must be in (0, 1]");
        }
        if self.extraction == Extraction::Centroid && self.word_embeddings_path.is_none() {
            return fail("centroid extraction requires word_embeddings_path");
        }
        Ok(())
    }

    pub fn coherence_config(&self) -> CoherenceConfig {
        CoherenceConfig {
            top_n_words: self.coherence_n,
            aggregation: self.aggregation,
            ..CoherenceConfig::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Preprocessed corpus plus embeddings, aligned and ready for runs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub corpus: Corpus,
    pub embeddings: EmbeddingMatrix,
    pub word_embeddings: Option<WordEmbeddingMatrix>,
    /// Documents left with no tokens after preprocessing.
    pub empty_documents: Vec<String>,
    /// Documents dropped for lack of an embedding.
    pub dropped: Vec<String>,
}

impl Inputs {
    /// Preprocesses `raw` and checks that it aligns with the embeddings.
    pub fn prepare(
        raw: &Corpus,
        stopwords: &Stopwords,
        embeddings: EmbeddingMatrix,
        word_embeddings: Option<WordEmbeddingMatrix>,
        drop_unmatched: bool,
    ) -> Result<Self> {
        let pre = corpus::preprocess(raw, stopwords)?;
        let report = embedding::align(&pre.corpus, &embeddings);
        let mut dropped = Vec::new();
        let corpus = if !report.missing.is_empty() && drop_unmatched {
            dropped = report.missing.clone();
            embedding::drop_unmatched(&pre.corpus, &embeddings)
                .ok_or(PipelineError::Alignment(report))?
        } else if !report.is_empty() && !drop_unmatched {
            return Err(PipelineError::Alignment(report));
        } else {
            pre.corpus
        };
        if let Some(w) = &word_embeddings {
            if w.dim() != embeddings.dim() {
                return Err(PipelineError::Config(format!(
                    "word embedding dim {} differs from document embedding dim {}",
                    w.dim(),
                    embeddings.dim()
                )));
            }
        }
        Ok(Self {
            corpus,
            embeddings,
            word_embeddings,
            empty_documents: pre.empty_documents,
            dropped,
        })
    }

    pub fn load(config: &RunConfig) -> Result<Self> {
        let raw = corpus::load_corpus(&config.corpus_path)?;
        let stopwords = match &config.stopwords_path {
            Some(p) => Stopwords::load(p)?,
            None => Stopwords::english(),
        };
        let embeddings = EmbeddingMatrix::read(&config.embeddings_path)?;
        let words = config
            .word_embeddings_path
            .as_ref()
            .map(WordEmbeddingMatrix::read)
            .transpose()?;
        Self::prepare(&raw, &stopwords, embeddings, words, config.drop_unmatched)
    }
}

/// Everything one seeded run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub run_index: usize,
    pub seed: u64,
    pub labeled: LabeledSet,
    pub contrastive_pairs: usize,
    pub projection: ProjectionHead,
    pub classifier_log: Vec<f64>,
    pub assignment: ClusterAssignment,
    pub topics: TopicSet,
    pub coherence: CoherenceReport,
    pub coherence_top: CoherenceReport,
    pub accuracy: Option<f64>,
    pub extracted_topics: usize,
    pub distribution: Option<DistributionComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct RunMetrics<'a> {
    run: usize,
    seed: u64,
    accuracy: Option<f64>,
    extracted_topics: usize,
    labeled_documents: usize,
    labeled_classes: usize,
    contrastive_pairs: usize,
    coherence: f64,
    coherence_top: f64,
    total_variation: Option<f64>,
    skipped_classes: &'a [String],
    uniform_fallback: &'a [String],
    projection_loss: &'a [f64],
    classifier_loss: &'a [f64],
}

impl RunResult {
    fn metrics(&self) -> RunMetrics<'_> {
        RunMetrics {
            run: self.run_index,
            seed: self.seed,
            accuracy: self.accuracy,
            extracted_topics: self.extracted_topics,
            labeled_documents: self.labeled.len(),
            labeled_classes: self.labeled.classes().len(),
            contrastive_pairs: self.contrastive_pairs,
            coherence: self.coherence.mean,
            coherence_top: self.coherence_top.mean,
            total_variation: self.distribution.as_ref().map(|d| d.total_variation),
            skipped_classes: &self.topics.skipped,
            uniform_fallback: &self.topics.uniform_fallback,
            projection_loss: &self.projection.training_log,
            classifier_loss: &self.classifier_log,
        }
    }
}

fn sample(inputs: &Inputs, mode: LabelMode, seed: u64) -> Result<LabeledSet> {
    Ok(match mode {
        LabelMode::PerClass(n) => fewshot::sample_per_class(&inputs.corpus, n, seed)?,
        LabelMode::RandomDraw(i) => fewshot::sample_random_draw(&inputs.corpus, i, seed)?,
    })
}

fn projected(proj: &ProjectionHead, m: &EmbeddingMatrix) -> EmbeddingMatrix {
    let mut out = EmbeddingMatrix::new(m.dim());
    for (id, v) in m.iter() {
        out.push(id, &proj.apply(v)).expect("projection of finite rows is finite");
    }
    out
}

/// Extracts topics from a clustering with the configured method.
pub fn extract(
    inputs: &Inputs,
    clusters: &ClusterAssignment,
    proj: &ProjectionHead,
    config: &RunConfig,
) -> Result<TopicSet> {
    match config.extraction {
        Extraction::Tfidf => {
            let scores = topics::class_tfidf(&inputs.corpus, clusters)?;
            Ok(topics::extract_topics(&scores, config.top_j))
        }
        Extraction::Centroid => {
            let words = inputs
                .word_embeddings
                .as_ref()
                .ok_or_else(|| PipelineError::Config("centroid extraction requires word embeddings".into()))?;
            let docs = projected(proj, &inputs.embeddings);
            let words = WordEmbeddingMatrix(projected(proj, words));
            let (centroids, skipped) = topics::compute_centroids(clusters, &docs)?;
            let mut set = topics::extract_topics_centroid(&centroids, &words, config.top_j)?;
            set.skipped = skipped;
            Ok(set)
        }
    }
}

/// One seeded repetition over prepared inputs.
pub fn run_once(
    inputs: &Inputs,
    reference: &ReferenceStats,
    config: &RunConfig,
    run_index: usize,
) -> Result<RunResult> {
    let seed = config.seed.wrapping_add(run_index as u64);
    let labeled = sample(inputs, config.mode, seed)?;

    // a single drawn class leaves nothing to contrast; keep the identity
    let (projection, contrastive_pairs) = if labeled.classes().len() >= 2 {
        let pairs = fewshot::build_pairs(&labeled, config.pairs_per_sample, seed, config.pair_mode)?;
        let proj = fewshot::train_projection(
            &pairs,
            &inputs.embeddings,
            ProjectionConfig {
                epochs: config.epochs,
                lr: config.lr,
                seed,
            },
        )?;
        (proj, pairs.len())
    } else {
        (ProjectionHead::identity(inputs.embeddings.dim()), 0)
    };

    let head = fewshot::train_classifier(
        &labeled,
        &inputs.embeddings,
        &projection,
        ClassifierConfig {
            epochs: config.head_epochs,
            lr: config.head_lr,
            seed,
        },
    )?;
    let assignment = fewshot::predict(
        &inputs.corpus,
        &inputs.embeddings,
        &projection,
        &head,
        Some(&labeled),
    )?;

    let topics = extract(inputs, &assignment, &projection, config)?;
    let coherence = eval::coherence_report(&topics, reference, &config.coherence_config())?;
    let coherence_top = eval::top_fraction_filter(&coherence, config.top_fraction)?;

    let labeled_truth = inputs.corpus.class_names.is_some();
    let accuracy = if labeled_truth {
        match eval::accuracy(&assignment, &inputs.corpus) {
            Ok(a) => Some(a),
            Err(EvalError::NoHeldOut) => None,
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let distribution = if labeled_truth {
        Some(eval::topic_distribution_compare(&assignment, &inputs.corpus)?)
    } else {
        None
    };

    Ok(RunResult {
        run_index,
        seed,
        labeled,
        contrastive_pairs,
        projection,
        classifier_log: head.training_log,
        extracted_topics: eval::count_extracted_topics(&assignment),
        assignment,
        topics,
        coherence,
        coherence_top,
        accuracy,
        distribution,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub max: f64,
    pub std: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (mean, std) = eval::mean_std(values);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self { mean, max, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub coherence: Summary,
    pub coherence_top: Summary,
    pub accuracy: Option<Summary>,
    pub extracted_topics: Summary,
}

impl Aggregate {
    pub fn from_runs(runs: &[RunResult]) -> Option<Self> {
        let pick = |f: &dyn Fn(&RunResult) -> f64| runs.iter().map(f).collect::<Vec<_>>();
        let accuracies: Vec<f64> = runs.iter().filter_map(|r| r.accuracy).collect();
        Some(Self {
            runs: runs.len(),
            seeds: runs.iter().map(|r| r.seed).collect(),
            coherence: Summary::of(&pick(&|r| r.coherence.mean))?,
            coherence_top: Summary::of(&pick(&|r| r.coherence_top.mean))?,
            accuracy: if accuracies.len() == runs.len() {
                Summary::of(&accuracies)
            } else {
                None
            },
            extracted_topics: Summary::of(&pick(&|r| r.extracted_topics as f64))?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub config: RunConfig,
    pub runs: Vec<RunResult>,
    pub aggregate: Aggregate,
}

/// All repetitions over already prepared inputs.
pub fn run_with_inputs(inputs: &Inputs, config: &RunConfig) -> Result<Bundle> {
    config.validate()?;
    let reference = ReferenceStats::new(&inputs.corpus)?;
    let runs = (0..config.runs)
        .map(|k| run_once(inputs, &reference, config, k))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = Aggregate::from_runs(&runs).ok_or_else(|| PipelineError::Config("no runs".into()))?;
    Ok(Bundle {
        config: config.clone(),
        runs,
        aggregate,
    })
}

/// Loads inputs from the configured paths, runs every repetition and
/// writes the bundle to `output_dir`.
pub fn run_pipeline(config: &RunConfig) -> Result<Bundle> {
    config.validate()?;
    let inputs = Inputs::load(config)?;
    let bundle = run_with_inputs(&inputs, config)?;
    bundle.write(&config.output_dir)?;
    Ok(bundle)
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct AggregateFile<'a> {
    #[serde(flatten)]
    aggregate: &'a Aggregate,
    per_run: Vec<RunMetrics<'a>>,
}

impl Bundle {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.json"), to_json(&self.config)?)?;
        for run in &self.runs {
            let rd = dir.join(format!("run_{}", run.run_index));
            fs::create_dir_all(&rd)?;
            let mut labeled = Vec::new();
            run.labeled.write(&mut labeled)?;
            fs::write(rd.join("labeled.jsonl"), labeled)?;
            fs::write(rd.join("topics.json"), run.topics.to_json() + "\n")?;
            fs::write(rd.join("topics.txt"), run.topics.to_table())?;
            fs::write(rd.join("coherence.json"), to_json(&run.coherence)?)?;
            fs::write(rd.join("coherence_top.json"), to_json(&run.coherence_top)?)?;
            fs::write(rd.join("accuracy.json"), to_json(&run.metrics())?)?;
            if let Some(d) = &run.distribution {
                fs::write(rd.join("distribution.csv"), d.to_csv())?;
            }
        }
        let file = AggregateFile {
            aggregate: &self.aggregate,
            per_run: self.runs.iter().map(RunResult::metrics).collect(),
        };
        fs::write(dir.join("aggregate.json"), to_json(&file)?)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub topics: TopicSet,
    pub report: CoherenceReport,
}

/// Clusters documents by their true labels and scores the extracted topics:
/// the coherence a perfectly accurate classifier would reach.
pub fn perfect_label_oracle(inputs: &Inputs, config: &RunConfig) -> Result<OracleResult> {
    let clusters = ClusterAssignment::from_true_labels(&inputs.corpus)?;
    let reference = ReferenceStats::new(&inputs.corpus)?;
    let identity = ProjectionHead::identity(inputs.embeddings.dim());
    let topics = extract(inputs, &clusters, &identity, config)?;
    let report = eval::coherence_report(&topics, &reference, &config.coherence_config())?;
    Ok(OracleResult { topics, report })
}
