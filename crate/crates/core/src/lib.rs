//! Few-shot topic extraction.
//!
//! A handful of labeled documents trains a contrastive projection and a
//! softmax classification head over precomputed document embeddings. The
//! rest of the corpus is classified, topics are extracted from the resulting
//! clusters with class-based tf-idf (or embedding centroids), and topics are
//! scored with NPMI coherence against the corpus itself.
//!
//! Pipeline stages map onto modules:
//!
//! - [`corpus`]: JSONL loading, preprocessing, vocabulary.
//! - [`embedding`]: the EMB text format for document and word vectors.
//! - [`fewshot`]: sampling, contrastive pairs, projection and classifier heads.
//! - [`topics`]: class-based tf-idf and centroid topic extraction.
//! - [`eval`]: NPMI coherence, accuracy, topic counts, distribution checks.
//! - [`pipeline`]: repeated seeded runs and the on-disk output bundle.

pub mod corpus;
pub mod embedding;
pub mod eval;
pub mod fewshot;
pub mod linalg;
pub mod pipeline;
pub mod synthetic;
pub mod topics;

pub use corpus::{Corpus, CorpusError, Document, Vocabulary};
pub use embedding::{EmbeddingError, EmbeddingMatrix, WordEmbeddingMatrix};
pub use eval::{CoherenceConfig, CoherenceReport, EvalError};
pub use fewshot::{ClassifierHead, FewShotError, LabeledSet, ProjectionHead};
pub use pipeline::{PipelineError, RunConfig};
pub use topics::{ClusterAssignment, Topic, TopicError, TopicSet};
