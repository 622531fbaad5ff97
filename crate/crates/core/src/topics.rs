//! Topic extraction from document clusters.
//!
//! The main route is class-based tf-idf: every cluster is treated as one
//! large document, each word is scored by its in-class frequency times a log
//! inverse of its corpus-wide frequency, and the clamped, L1-normalized scores
//! form the topic's word distribution. The alternative route ranks word
//! embeddings by cosine similarity to each cluster's centroid.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Vocabulary};
use crate::embedding::{EmbeddingMatrix, WordEmbeddingMatrix};
use crate::linalg::cosine_sim;

pub const DEFAULT_TOP_J: usize = 10;

#[derive(Debug, Error)]
pub enum TopicError {
    #[error("document {0:?} has no cluster assignment")]
    Unassigned(String),
    #[error("cluster assignment names unknown document {0:?}")]
    UnknownDocument(String),
    #[error("no class has any tokens")]
    NoTokens,
    #[error("corpus has unlabeled documents, e.g. {0:?}")]
    Unlabeled(String),
    #[error("no embedding for document {0:?}")]
    MissingEmbedding(String),
    #[error("word embeddings are empty")]
    EmptyWordEmbeddings,
    #[error("dimension mismatch: centroids have {centroid}, word embeddings {words}")]
    DimMismatch { centroid: usize, words: usize },
    #[error("no non-empty cluster to build a centroid from")]
    NoCentroids,
    #[error("invalid topics json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TopicError>;

/// Hard document-to-class assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Class order; drives topic order and tie-breaking.
    pub classes: Vec<String>,
    pub assignment: BTreeMap<String, String>,
    /// Documents whose class was given rather than predicted.
    #[serde(default)]
    pub fixed: BTreeSet<String>,
}

impl ClusterAssignment {
    /// Builds an assignment; classes used but missing from `classes` are
    /// appended in sorted order.
    pub fn new(
        pairs: impl IntoIterator<Item = (String, String)>,
        mut classes: Vec<String>,
        fixed: BTreeSet<String>,
    ) -> Self {
        let assignment: BTreeMap<String, String> = pairs.into_iter().collect();
        let extra: BTreeSet<&String> = assignment
            .values()
            .filter(|c| !classes.contains(c))
            .collect();
        let extra: Vec<String> = extra.into_iter().cloned().collect();
        classes.extend(extra);
        Self {
            classes,
            assignment,
            fixed,
        }
    }

    /// Clusters documents by their true labels.
    pub fn from_true_labels(corpus: &Corpus) -> Result<Self> {
        let pairs = corpus
            .documents
            .iter()
            .map(|d| {
                d.true_label
                    .clone()
                    .map(|l| (d.id.clone(), l))
                    .ok_or_else(|| TopicError::Unlabeled(d.id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let classes = corpus.class_names.clone().unwrap_or_default();
        Ok(Self::new(pairs, classes, BTreeSet::new()))
    }

    pub fn class_of(&self, id: &str) -> Option<&str> {
        self.assignment.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Member count per class, in class order.
    pub fn class_sizes(&self) -> Vec<(String, usize)> {
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for c in self.assignment.values() {
            *counts.entry(c.as_str()).or_default() += 1;
        }
        self.classes
            .iter()
            .map(|c| (c.clone(), counts.get(c.as_str()).copied().unwrap_or(0)))
            .collect()
    }

    /// Fails unless every corpus document is assigned and nothing else is.
    pub fn check_covers(&self, corpus: &Corpus) -> Result<()> {
        for d in &corpus.documents {
            if !self.assignment.contains_key(&d.id) {
                return Err(TopicError::Unassigned(d.id.clone()));
            }
        }
        if self.assignment.len() != corpus.len() {
            let ids: BTreeSet<&str> = corpus.documents.iter().map(|d| d.id.as_str()).collect();
            if let Some(id) = self.assignment.keys().find(|k| !ids.contains(k.as_str())) {
                return Err(TopicError::UnknownDocument(id.clone()));
            }
        }
        Ok(())
    }
}

/// Raw counts behind class-based tf-idf, indexed by vocabulary position.
#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfStats {
    pub vocabulary: Vocabulary,
    /// Classes with at least one token, in assignment class order.
    pub classes: Vec<String>,
    pub class_word_freq: Vec<Vec<u64>>,
    pub class_token_total: Vec<u64>,
    /// Number of documents in the corpus.
    pub total_docs: usize,
    /// Token frequency of each word summed over all classes.
    pub word_total_freq: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassTfIdf {
    pub stats: TfIdfStats,
    /// `scores[c][w]`, aligned with `stats.classes` and the vocabulary.
    pub scores: Vec<Vec<f64>>,
    /// Classes dropped because they have no tokens.
    pub skipped: Vec<String>,
}

impl ClassTfIdf {
    pub fn score(&self, class: &str, word: &str) -> Option<f64> {
        let c = self.stats.classes.iter().position(|k| k == class)?;
        let w = self.stats.vocabulary.index_of(word)?;
        Some(self.scores[c][w])
    }
}

/// `tf-idf(w|c) = freq(w, c) / n_c · ln(N / Σ_c freq(w, c))`.
pub fn class_tfidf(corpus: &Corpus, clusters: &ClusterAssignment) -> Result<ClassTfIdf> {
    clusters.check_covers(corpus)?;
    let vocab = &corpus.vocabulary;
    let class_pos: HashMap<&str, usize> = clusters
        .classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut freq = vec![vec![0u64; vocab.len()]; clusters.classes.len()];
    for doc in &corpus.documents {
        let class = clusters.assignment[&doc.id].as_str();
        let row = &mut freq[class_pos[class]];
        for t in &doc.tokens {
            let w = vocab
                .index_of(t)
                .expect("corpus invariant: every token is in the vocabulary");
            row[w] += 1;
        }
    }

    let mut classes = Vec::new();
    let mut class_word_freq = Vec::new();
    let mut class_token_total = Vec::new();
    let mut skipped = Vec::new();
    for (class, row) in clusters.classes.iter().zip(freq) {
        let total: u64 = row.iter().sum();
        if total == 0 {
            skipped.push(class.clone());
        } else {
            classes.push(class.clone());
            class_word_freq.push(row);
            class_token_total.push(total);
        }
    }
    if classes.is_empty() {
        return Err(TopicError::NoTokens);
    }
    let mut word_total_freq = vec![0u64; vocab.len()];
    for row in &class_word_freq {
        for (t, f) in word_total_freq.iter_mut().zip(row) {
            *t += f;
        }
    }
    let n_docs = corpus.len() as f64;
    let idf: Vec<f64> = word_total_freq
        .iter()
        .map(|&t| if t == 0 { 0.0 } else { (n_docs / t as f64).ln() })
        .collect();
    let scores = class_word_freq
        .iter()
        .zip(&class_token_total)
        .map(|(row, &n_c)| {
            row.iter()
                .zip(&idf)
                .map(|(&f, &idf)| f as f64 / n_c as f64 * idf)
                .collect()
        })
        .collect();
    Ok(ClassTfIdf {
        stats: TfIdfStats {
            vocabulary: vocab.clone(),
            classes,
            class_word_freq,
            class_token_total,
            total_docs: corpus.len(),
            word_total_freq,
        },
        scores,
        skipped,
    })
}

/// A topic: a word distribution ranked by weight, ties broken
/// lexicographically.
#[derive(Debug, Clone, PartialEq)]
pub struct Topic {
    pub class_name: String,
    /// Ranked distribution. For extracted topics this spans the full
    /// vocabulary; topics read back from JSON hold only the top words.
    pub ranked: Vec<(String, f64)>,
    pub top_j: usize,
}

impl Topic {
    pub fn entries(&self) -> &[(String, f64)] {
        &self.ranked[..self.top_j.min(self.ranked.len())]
    }

    pub fn top_words(&self, n: usize) -> impl Iterator<Item = &str> {
        self.ranked.iter().take(n).map(|(w, _)| w.as_str())
    }

    pub fn total_mass(&self) -> f64 {
        self.ranked.iter().map(|(_, p)| p).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TopicSet {
    pub topics: Vec<Topic>,
    /// Classes with no tokens or no members.
    pub skipped: Vec<String>,
    /// Classes whose scores were all non-positive and got a uniform
    /// distribution over their observed words.
    pub uniform_fallback: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TopicJson {
    class: String,
    words: Vec<(String, f64)>,
}

impl TopicSet {
    pub fn len(&self) -> usize {
        self.topics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.topics.is_empty()
    }

    pub fn get(&self, class: &str) -> Option<&Topic> {
        self.topics.iter().find(|t| t.class_name == class)
    }

    /// `[{"class": ..., "words": [[word, phi], ...]}, ...]` with the top
    /// `top_j` words of each topic.
    pub fn to_json(&self) -> String {
        let out: Vec<TopicJson> = self
            .topics
            .iter()
            .map(|t| TopicJson {
                class: t.class_name.clone(),
                words: t.entries().to_vec(),
            })
            .collect();
        serde_json::to_string_pretty(&out).expect("topics serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: Vec<TopicJson> = serde_json::from_str(text)?;
        Ok(Self {
            topics: parsed
                .into_iter()
                .map(|t| Topic {
                    class_name: t.class,
                    top_j: t.words.len(),
                    ranked: t.words,
                })
                .collect(),
            ..Self::default()
        })
    }

    /// Plain-text table: one column per topic, one row per rank.
    pub fn to_table(&self) -> String {
        let columns: Vec<Vec<&str>> = self
            .topics
            .iter()
            .map(|t| {
                std::iter::once(t.class_name.as_str())
                    .chain(t.entries().iter().map(|(w, _)| w.as_str()))
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = columns
            .iter()
            .map(|c| c.iter().map(|s| s.chars().count()).max().unwrap_or(0))
            .collect();
        let depth = columns.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = String::new();
        for row in 0..depth {
            let cells: Vec<String> = columns
                .iter()
                .zip(&widths)
                .map(|(col, &w)| format!("{:<w$}", col.get(row).copied().unwrap_or("")))
                .collect();
            let _ = writeln!(out, "{}", cells.join(" | ").trim_end());
            if row == 0 {
                let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
                let _ = writeln!(out, "{}", rule.join("-+-"));
            }
        }
        out
    }
}

// ranks by weight descending, then by word
fn rank(mut weighted: Vec<(String, f64)>) -> Vec<(String, f64)> {
    weighted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    weighted
}

/// Clamps negative scores to zero and L1-normalizes each class's scores
/// over the vocabulary.
pub fn extract_topics(tfidf: &ClassTfIdf, top_j: usize) -> TopicSet {
    let vocab = tfidf.stats.vocabulary.words();
    let mut set = TopicSet {
        skipped: tfidf.skipped.clone(),
        ..TopicSet::default()
    };
    for (c, class) in tfidf.stats.classes.iter().enumerate() {
        let clamped: Vec<f64> = tfidf.scores[c].iter().map(|s| s.max(0.0)).collect();
        let total: f64 = clamped.iter().sum();
        let phi: Vec<f64> = if total > 0.0 {
            clamped.iter().map(|s| s / total).collect()
        } else {
            set.uniform_fallback.push(class.clone());
            let observed = &tfidf.stats.class_word_freq[c];
            let count = observed.iter().filter(|&&f| f > 0).count() as f64;
            observed
                .iter()
                .map(|&f| if f > 0 { 1.0 / count } else { 0.0 })
                .collect()
        };
        let ranked = rank(vocab.iter().cloned().zip(phi).collect());
        set.topics.push(Topic {
            class_name: class.clone(),
            ranked,
            top_j,
        });
    }
    set
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroid {
    pub class_name: String,
    pub vector: Vec<f64>,
}

/// Mean embedding of each class's members. Classes without members are
/// returned in the second list.
pub fn compute_centroids(
    clusters: &ClusterAssignment,
    emb: &EmbeddingMatrix,
) -> Result<(Vec<Centroid>, Vec<String>)> {
    let dim = emb.dim();
    let mut sums: HashMap<&str, (Vec<f64>, usize)> = HashMap::new();
    for (id, class) in &clusters.assignment {
        let v = emb
            .get(id)
            .ok_or_else(|| TopicError::MissingEmbedding(id.clone()))?;
        let entry = sums
            .entry(class.as_str())
            .or_insert_with(|| (vec![0.0; dim], 0));
        for (s, x) in entry.0.iter_mut().zip(v) {
            *s += x;
        }
        entry.1 += 1;
    }
    let mut centroids = Vec::new();
    let mut skipped = Vec::new();
    for class in &clusters.classes {
        match sums.get(class.as_str()) {
            Some((sum, count)) => centroids.push(Centroid {
                class_name: class.clone(),
                vector: sum.iter().map(|s| s / *count as f64).collect(),
            }),
            None => skipped.push(class.clone()),
        }
    }
    Ok((centroids, skipped))
}

/// Ranks every embedded word by cosine similarity to each centroid; the
/// topic distribution is the clamped, L1-normalized similarity vector.
pub fn extract_topics_centroid(
    centroids: &[Centroid],
    word_emb: &WordEmbeddingMatrix,
    top_j: usize,
) -> Result<TopicSet> {
    if word_emb.is_empty() {
        return Err(TopicError::EmptyWordEmbeddings);
    }
    if centroids.is_empty() {
        return Err(TopicError::NoCentroids);
    }
    let mut set = TopicSet::default();
    for centroid in centroids {
        if centroid.vector.len() != word_emb.dim() {
            return Err(TopicError::DimMismatch {
                centroid: centroid.vector.len(),
                words: word_emb.dim(),
            });
        }
        let sims: Vec<(String, f64)> = word_emb
            .iter()
            .map(|(w, v)| (w.to_owned(), cosine_sim(v, &centroid.vector)))
            .collect();
        let total: f64 = sims.iter().map(|(_, s)| s.max(0.0)).sum();
        let by_similarity = rank(sims);
        let ranked = if total > 0.0 {
            by_similarity
                .into_iter()
                .map(|(w, s)| (w, s.max(0.0) / total))
                .collect()
        } else {
            set.uniform_fallback.push(centroid.class_name.clone());
            let u = 1.0 / by_similarity.len() as f64;
            by_similarity.into_iter().map(|(w, _)| (w, u)).collect()
        };
        set.topics.push(Topic {
            class_name: centroid.class_name.clone(),
            ranked,
            top_j,
        });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(docs: &[(&str, &[&str])]) -> Corpus {
        Corpus::new(
            docs.iter()
                .map(|(id, toks)| Document {
                    id: id.to_string(),
                    raw_text: toks.join(" "),
                    tokens: toks.iter().map(|s| s.to_string()).collect(),
                    true_label: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn clusters(pairs: &[(&str, &str)]) -> ClusterAssignment {
        ClusterAssignment::new(
            pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())),
            vec![],
            BTreeSet::new(),
        )
    }

    // straight count-and-formula evaluation of a single (class, word) score
    fn oracle_score(docs: &[(String, Vec<String>, String)], class: &str, word: &str) -> f64 {
        let freq = docs
            .iter()
            .filter(|d| d.2 == class)
            .flat_map(|d| d.1.iter())
            .filter(|t| *t == word)
            .count() as f64;
        let n_c = docs
            .iter()
            .filter(|d| d.2 == class)
            .map(|d| d.1.len())
            .sum::<usize>() as f64;
        let total = docs.iter().flat_map(|d| d.1.iter()).filter(|t| *t == word).count() as f64;
        if freq == 0.0 {
            return 0.0;
        }
        freq / n_c * (docs.len() as f64 / total).ln()
    }

    #[test]
    fn three_document_hand_case() {
        let c = corpus(&[("1", &["cat", "cat"]), ("2", &["dog"]), ("3", &["dog", "fish"])]);
        let k = clusters(&[("1", "A"), ("2", "A"), ("3", "B")]);
        let t = class_tfidf(&c, &k).unwrap();
        assert!((t.score("A", "cat").unwrap() - 0.27031).abs() < 1e-5);
        assert!((t.score("B", "fish").unwrap() - 0.54931).abs() < 1e-5);
        assert_eq!(t.score("B", "cat").unwrap(), 0.0);
        assert_eq!(t.stats.class_token_total, vec![3, 2]);
        assert_eq!(t.stats.total_docs, 3);
    }

    #[test]
    fn word_with_frequency_equal_to_doc_count_scores_zero() {
        let c = corpus(&[("1", &["ubiq", "aaa"]), ("2", &["ubiq"]), ("3", &["ubiq", "bbb"])]);
        let k = clusters(&[("1", "A"), ("2", "A"), ("3", "B")]);
        let t = class_tfidf(&c, &k).unwrap();
        assert_eq!(t.score("A", "ubiq").unwrap(), 0.0);
        assert_eq!(t.score("B", "ubiq").unwrap(), 0.0);
    }

    #[test]
    fn empty_class_skipped() {
        let c = corpus(&[("1", &["cat"]), ("2", &[])]);
        let k = clusters(&[("1", "A"), ("2", "B")]);
        let t = class_tfidf(&c, &k).unwrap();
        assert_eq!(t.skipped, vec!["B".to_string()]);
        assert_eq!(t.stats.classes, vec!["A".to_string()]);
        let set = extract_topics(&t, 10);
        assert_eq!(set.skipped, vec!["B".to_string()]);
    }

    #[test]
    fn coverage_is_checked() {
        let c = corpus(&[("1", &["cat"]), ("2", &["dog"])]);
        assert!(matches!(
            class_tfidf(&c, &clusters(&[("1", "A")])),
            Err(TopicError::Unassigned(id)) if id == "2"
        ));
        assert!(matches!(
            class_tfidf(&c, &clusters(&[("1", "A"), ("2", "A"), ("9", "B")])),
            Err(TopicError::UnknownDocument(id)) if id == "9"
        ));
    }

    fn manual_scores(words: &[&str], scores: &[f64]) -> ClassTfIdf {
        let vocabulary = Vocabulary::from_words(words.iter().copied());
        ClassTfIdf {
            stats: TfIdfStats {
                vocabulary,
                classes: vec!["A".into()],
                class_word_freq: vec![vec![1; words.len()]],
                class_token_total: vec![words.len() as u64],
                total_docs: 1,
                word_total_freq: vec![1; words.len()],
            },
            scores: vec![scores.to_vec()],
            skipped: vec![],
        }
    }

    #[test]
    fn normalization_hand_cases() {
        let set = extract_topics(&manual_scores(&["a", "b"], &[0.2, 0.6]), 10);
        let t = &set.topics[0];
        assert_eq!(t.ranked[0].0, "b");
        assert!((t.ranked[0].1 - 0.75).abs() < 1e-12);
        assert!((t.ranked[1].1 - 0.25).abs() < 1e-12);

        let set = extract_topics(&manual_scores(&["a", "b", "c"], &[0.5, -0.3, 0.5]), 10);
        let words: Vec<_> = set.topics[0].ranked.iter().map(|(w, p)| (w.as_str(), *p)).collect();
        assert_eq!(words, vec![("a", 0.5), ("c", 0.5), ("b", 0.0)]);
    }

    #[test]
    fn all_nonpositive_scores_fall_back_to_uniform() {
        let set = extract_topics(&manual_scores(&["a", "b"], &[0.0, -1.0]), 10);
        assert_eq!(set.uniform_fallback, vec!["A".to_string()]);
        assert!((set.topics[0].total_mass() - 1.0).abs() < 1e-12);
        assert!(set.topics[0].ranked.iter().all(|(_, p)| (*p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn planted_class_words_rank_first() {
        let mut docs = Vec::new();
        let a_words = ["alpha", "bravo", "charlie", "delta", "echo"];
        let b_words = ["xray", "yankee", "zulu"];
        for i in 0..6 {
            let mut toks: Vec<&str> = a_words.to_vec();
            toks.push("shared");
            docs.push((format!("a{i}"), toks, "A"));
            docs.push((format!("b{i}"), vec!["xray", "yankee", "zulu", "shared", "shared"], "B"));
        }
        let c = Corpus::new(
            docs.iter()
                .map(|(id, toks, _)| Document {
                    id: id.clone(),
                    raw_text: String::new(),
                    tokens: toks.iter().map(|s| s.to_string()).collect(),
                    true_label: None,
                })
                .collect(),
        )
        .unwrap();
        let k = ClusterAssignment::new(
            docs.iter().map(|(id, _, l)| (id.clone(), l.to_string())),
            vec![],
            BTreeSet::new(),
        );
        let set = extract_topics(&class_tfidf(&c, &k).unwrap(), 5);
        let top: BTreeSet<&str> = set.get("A").unwrap().entries().iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(top, a_words.iter().copied().collect());
        let top_b: Vec<&str> = set.get("B").unwrap().top_words(3).collect();
        assert!(top_b.iter().all(|w| b_words.contains(w)));
    }

    #[test]
    fn topics_json_round_trip_and_table() {
        let set = extract_topics(&manual_scores(&["moon", "orbit", "rocket"], &[0.2, 0.3, 0.5]), 2);
        let json = set.to_json();
        let back = TopicSet::from_json(&json).unwrap();
        assert_eq!(back.topics[0].ranked, set.topics[0].entries().to_vec());
        let table = set.to_table();
        assert!(table.starts_with("A\n-"));
        assert!(table.contains("rocket"));
        assert!(!table.contains("moon"));
    }

    #[test]
    fn centroid_hand_cases() {
        let mut emb = EmbeddingMatrix::new(2);
        emb.push("a", &[1.0, 0.0]).unwrap();
        emb.push("b", &[0.0, 1.0]).unwrap();
        emb.push("c", &[3.0, -1.0]).unwrap();
        let k = ClusterAssignment::new(
            [("a", "X"), ("b", "X"), ("c", "Y")].map(|(a, b)| (a.to_string(), b.to_string())),
            vec!["X".into(), "Y".into(), "Z".into()],
            BTreeSet::new(),
        );
        let (cents, skipped) = compute_centroids(&k, &emb).unwrap();
        assert_eq!(cents[0].vector, vec![0.5, 0.5]);
        assert_eq!(cents[1].vector, vec![3.0, -1.0]);
        assert_eq!(skipped, vec!["Z".to_string()]);
    }

    #[test]
    fn centroid_of_many_matches_oracle_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut emb = EmbeddingMatrix::new(8);
        let mut pairs = Vec::new();
        let mut rows = Vec::new();
        for i in 0..100 {
            let v: Vec<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
            emb.push(format!("d{i}"), &v).unwrap();
            pairs.push((format!("d{i}"), "K".to_string()));
            rows.push(v);
        }
        let k = ClusterAssignment::new(pairs, vec![], BTreeSet::new());
        let (cents, _) = compute_centroids(&k, &emb).unwrap();
        for j in 0..8 {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / 100.0;
            assert!((cents[0].vector[j] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn centroid_extraction_orders_by_similarity() {
        let mut words = EmbeddingMatrix::new(2);
        words.push("plus", &[2.0, 0.1]).unwrap();
        words.push("minus", &[-1.0, 0.0]).unwrap();
        words.push("exact", &[1.0, 0.0]).unwrap();
        let cents = vec![Centroid {
            class_name: "K".into(),
            vector: vec![1.0, 0.0],
        }];
        let set = extract_topics_centroid(&cents, &WordEmbeddingMatrix(words), 10).unwrap();
        let t = &set.topics[0];
        assert_eq!(t.ranked[0].0, "exact");
        assert_eq!(t.ranked[1].0, "plus");
        assert_eq!(t.ranked[2], ("minus".to_string(), 0.0));
        assert!((t.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn centroid_normalization_of_known_similarities() {
        // sims 0.8 and 0.2 against centroid e1
        let mut words = EmbeddingMatrix::new(2);
        words.push("u", &[0.8, 0.6]).unwrap();
        words.push("v", &[0.2, (1.0f64 - 0.04).sqrt()]).unwrap();
        let cents = vec![Centroid {
            class_name: "K".into(),
            vector: vec![1.0, 0.0],
        }];
        let set = extract_topics_centroid(&cents, &WordEmbeddingMatrix(words), 10).unwrap();
        assert!((set.topics[0].ranked[0].1 - 0.8).abs() < 1e-12);
        assert!((set.topics[0].ranked[1].1 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn centroid_errors() {
        let cents = vec![Centroid {
            class_name: "K".into(),
            vector: vec![1.0, 0.0],
        }];
        assert!(matches!(
            extract_topics_centroid(&cents, &WordEmbeddingMatrix(EmbeddingMatrix::new(2)), 10),
            Err(TopicError::EmptyWordEmbeddings)
        ));
        let mut w3 = EmbeddingMatrix::new(3);
        w3.push("x", &[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            extract_topics_centroid(&cents, &WordEmbeddingMatrix(w3), 10),
            Err(TopicError::DimMismatch { .. })
        ));
    }

    fn random_docs(seed: u64, n_docs: usize, vocab: usize, n_classes: usize) -> Vec<(String, Vec<String>, String)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_docs)
            .map(|i| {
                let len = rng.random_range(0..8);
                let toks = (0..len).map(|_| format!("w{}", rng.random_range(0..vocab))).collect();
                (format!("d{i}"), toks, format!("k{}", rng.random_range(0..n_classes)))
            })
            .collect()
    }

    fn build(docs: &[(String, Vec<String>, String)]) -> Option<(Corpus, ClusterAssignment)> {
        if docs.iter().all(|d| d.1.is_empty()) {
            return None;
        }
        let c = Corpus::new(
            docs.iter()
                .map(|(id, toks, _)| Document {
                    id: id.clone(),
                    raw_text: String::new(),
                    tokens: toks.clone(),
                    true_label: None,
                })
                .collect(),
        )
        .unwrap();
        let mut classes: Vec<String> = docs.iter().map(|d| d.2.clone()).collect();
        classes.sort();
        classes.dedup();
        let k = ClusterAssignment::new(
            docs.iter().map(|d| (d.0.clone(), d.2.clone())),
            classes,
            BTreeSet::new(),
        );
        Some((c, k))
    }

    proptest! {
        #[test]
        fn scores_match_oracle_and_phi_sums_to_one(seed in any::<u64>(), n in 1usize..=20) {
            let docs = random_docs(seed, n, 12, 3);
            if let Some((c, k)) = build(&docs) {
                let t = class_tfidf(&c, &k).unwrap();
                for class in &t.stats.classes {
                    for w in c.vocabulary.words() {
                        let got = t.score(class, w).unwrap();
                        prop_assert!((got - oracle_score(&docs, class, w)).abs() < 1e-12);
                    }
                }
                for topic in extract_topics(&t, 10).topics {
                    prop_assert!((topic.total_mass() - 1.0).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn topics_invariant_to_document_order(seed in any::<u64>()) {
            let docs = random_docs(seed, 15, 10, 3);
            let mut rev = docs.clone();
            rev.reverse();
            if let (Some((c1, k1)), Some((c2, k2))) = (build(&docs), build(&rev)) {
                let a = extract_topics(&class_tfidf(&c1, &k1).unwrap(), 10);
                let b = extract_topics(&class_tfidf(&c2, &k2).unwrap(), 10);
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn rank_order_invariant_to_duplicating_documents(seed in any::<u64>()) {
            let docs = random_docs(seed, 10, 10, 3);
            let mut doubled = docs.clone();
            doubled.extend(docs.iter().map(|(id, t, c)| (format!("{id}dup"), t.clone(), c.clone())));
            if let (Some((c1, k1)), Some((c2, k2))) = (build(&docs), build(&doubled)) {
                let a = extract_topics(&class_tfidf(&c1, &k1).unwrap(), 10);
                let b = extract_topics(&class_tfidf(&c2, &k2).unwrap(), 10);
                for (ta, tb) in a.topics.iter().zip(&b.topics) {
                    let wa: Vec<_> = ta.ranked.iter().map(|(w, _)| w).collect();
                    let wb: Vec<_> = tb.ranked.iter().map(|(w, _)| w).collect();
                    prop_assert_eq!(wa, wb);
                }
            }
        }
    }
}
