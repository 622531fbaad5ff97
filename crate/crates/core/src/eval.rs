//! Topic and classification evaluation.
//!
//! Coherence is NPMI over document-level co-occurrence in a reference corpus
//! (normally the corpus the topics were extracted from). A topic's score
//! aggregates the pair scores of its top-N words.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::topics::{ClusterAssignment, Topic, TopicSet};

pub const DEFAULT_TOP_N_WORDS: usize = 10;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("word {0:?} does not occur in the reference corpus")]
    WordNotInReference(String),
    #[error("topic {class:?} has {found} scoreable words, {needed} required")]
    TopicTooShort {
        class: String,
        found: usize,
        needed: usize,
    },
    #[error("coherence needs at least 2 top words, got {0}")]
    InvalidTopN(usize),
    #[error("fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("no topics to evaluate")]
    NoTopics,
    #[error("reference corpus is empty")]
    EmptyReference,
    #[error("corpus has no true labels")]
    NoTrueLabels,
    #[error("no held-out labeled documents to score")]
    NoHeldOut,
    #[error("document {0:?} has no predicted class")]
    Unassigned(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Mean over all `N(N-1)/2` word pairs.
    #[default]
    Mean,
    /// Plain sum over word pairs.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceConfig {
    pub top_n_words: usize,
    /// Score for a pair that never co-occurs.
    pub zero_cooccurrence_value: f64,
    pub aggregation: Aggregation,
}

impl Default for CoherenceConfig {
    fn default() -> Self {
        Self {
            top_n_words: DEFAULT_TOP_N_WORDS,
            zero_cooccurrence_value: -1.0,
            aggregation: Aggregation::Mean,
        }
    }
}

/// Document-frequency index over a reference corpus.
#[derive(Debug, Clone)]
pub struct ReferenceStats {
    num_docs: usize,
    /// Sorted ids of the documents containing each word.
    postings: HashMap<String, Vec<u32>>,
}

impl ReferenceStats {
    pub fn new(corpus: &Corpus) -> Result<Self> {
        if corpus.is_empty() {
            return Err(EvalError::EmptyReference);
        }
        let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
        for (d, doc) in corpus.documents.iter().enumerate() {
            let unique: BTreeSet<&str> = doc.tokens.iter().map(String::as_str).collect();
            for w in unique {
                postings.entry(w.to_owned()).or_default().push(d as u32);
            }
        }
        Ok(Self {
            num_docs: corpus.len(),
            postings,
        })
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn contains(&self, word: &str) -> bool {
        self.postings.contains_key(word)
    }

    pub fn doc_freq(&self, word: &str) -> Option<usize> {
        self.postings.get(word).map(Vec::len)
    }

    /// Number of documents containing both words.
    pub fn joint_freq(&self, a: &str, b: &str) -> Option<usize> {
        let (pa, pb) = (self.postings.get(a)?, self.postings.get(b)?);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        Some(n)
    }
}

/// Normalized PMI of two words, with probabilities estimated as document
/// frequencies over the reference corpus.
///
/// A pair that never co-occurs scores `zero_value`. A pair present in every
/// document scores 1.
pub fn npmi_pair(a: &str, b: &str, reference: &ReferenceStats, zero_value: f64) -> Result<f64> {
    let m = reference.num_docs as f64;
    let fa = reference
        .doc_freq(a)
        .ok_or_else(|| EvalError::WordNotInReference(a.to_owned()))?;
    let fb = reference
        .doc_freq(b)
        .ok_or_else(|| EvalError::WordNotInReference(b.to_owned()))?;
    let fab = reference.joint_freq(a, b).unwrap_or(0);
    if fab == 0 {
        return Ok(zero_value);
    }
    if fab == reference.num_docs {
        return Ok(1.0);
    }
    let (pa, pb, pab) = (fa as f64 / m, fb as f64 / m, fab as f64 / m);
    Ok((pab / (pa * pb)).ln() / -pab.ln())
}

/// Coherence of one topic over its first `top_n_words` words that occur in
/// the reference corpus.
pub fn npmi_topic(topic: &Topic, reference: &ReferenceStats, config: &CoherenceConfig) -> Result<f64> {
    let n = config.top_n_words;
    if n < 2 {
        return Err(EvalError::InvalidTopN(n));
    }
    let words: Vec<&str> = topic
        .ranked
        .iter()
        .map(|(w, _)| w.as_str())
        .filter(|w| reference.contains(w))
        .take(n)
        .collect();
    if words.len() < n {
        return Err(EvalError::TopicTooShort {
            class: topic.class_name.clone(),
            found: words.len(),
            needed: n,
        });
    }
    let mut total = 0.0;
    for j in 1..n {
        for i in 0..j {
            total += npmi_pair(words[i], words[j], reference, config.zero_cooccurrence_value)?;
        }
    }
    Ok(match config.aggregation {
        Aggregation::Mean => total / (n * (n - 1) / 2) as f64,
        Aggregation::Sum => total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicScore {
    pub class: String,
    pub npmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub per_topic: Vec<TopicScore>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub config: CoherenceConfig,
}

impl CoherenceReport {
    pub fn from_scores(per_topic: Vec<TopicScore>, config: CoherenceConfig) -> Self {
        let values: Vec<f64> = per_topic.iter().map(|s| s.npmi).collect();
        let (mean, std) = mean_std(&values);
        Self {
            per_topic,
            mean,
            std,
            config,
        }
    }

    pub fn score(&self, class: &str) -> Option<f64> {
        self.per_topic.iter().find(|s| s.class == class).map(|s| s.npmi)
    }
}

/// Mean and population standard deviation; `(0, 0)` for an empty slice.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn coherence_report(
    topics: &TopicSet,
    reference: &ReferenceStats,
    config: &CoherenceConfig,
) -> Result<CoherenceReport> {
    if topics.is_empty() {
        return Err(EvalError::NoTopics);
    }
    let per_topic = topics
        .topics
        .iter()
        .map(|t| {
            Ok(TopicScore {
                class: t.class_name.clone(),
                npmi: npmi_topic(t, reference, config)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CoherenceReport::from_scores(per_topic, *config))
}

/// Keeps the `ceil(fraction · K)` best-scoring topics, in their original
/// order, and recomputes the statistics.
pub fn top_fraction_filter(report: &CoherenceReport, fraction: f64) -> Result<CoherenceReport> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    if report.per_topic.is_empty() {
        return Err(EvalError::NoTopics);
    }
    let k = report.per_topic.len();
    // tolerance keeps e.g. 0.3 * 10 from rounding up to 4
    let keep = ((fraction * k as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        report.per_topic[b]
            .npmi
            .total_cmp(&report.per_topic[a].npmi)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order.into_iter().take(keep).collect();
    kept.sort_unstable();
    let per_topic = kept.into_iter().map(|i| report.per_topic[i].clone()).collect();
    Ok(CoherenceReport::from_scores(per_topic, report.config))
}

/// Share of held-out labeled documents whose predicted class matches the
/// true label. Documents with given labels and unlabeled documents are
/// excluded.
pub fn accuracy(pred: &ClusterAssignment, corpus: &Corpus) -> Result<f64> {
    if corpus.class_names.is_none() {
        return Err(EvalError::NoTrueLabels);
    }
    let mut total = 0usize;
    let mut correct = 0usize;
    for doc in &corpus.documents {
        let Some(truth) = doc.true_label.as_deref() else {
            continue;
        };
        if pred.fixed.contains(&doc.id) {
            continue;
        }
        let predicted = pred
            .class_of(&doc.id)
            .ok_or_else(|| EvalError::Unassigned(doc.id.clone()))?;
        total += 1;
        if predicted == truth {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(EvalError::NoHeldOut);
    }
    Ok(correct as f64 / total as f64)
}

/// Number of classes that received at least one document.
pub fn count_extracted_topics(pred: &ClusterAssignment) -> usize {
    pred.assignment.values().collect::<BTreeSet<_>>().len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub class: String,
    pub predicted_fraction: f64,
    pub true_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionComparison {
    pub rows: Vec<DistributionRow>,
    /// Half the L1 distance between the two histograms.
    pub total_variation: f64,
}

impl DistributionComparison {
    pub fn predicted(&self) -> impl Iterator<Item = (&str, f64)> {
        self.rows.iter().map(|r| (r.class.as_str(), r.predicted_fraction))
    }

    pub fn truth(&self) -> impl Iterator<Item = (&str, f64)> {
        self.rows.iter().map(|r| (r.class.as_str(), r.true_fraction))
    }

    /// `class,predicted_fraction,true_fraction` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,predicted_fraction,true_fraction\n");
        for r in &self.rows {
            let class = if r.class.contains([',', '"', '\n']) {
                format!("\"{}\"", r.class.replace('"', "\"\""))
            } else {
                r.class.clone()
            };
            out.push_str(&format!("{class},{:?},{:?}\n", r.predicted_fraction, r.true_fraction));
        }
        out
    }
}

/// Compares predicted and true class histograms over labeled documents.
pub fn topic_distribution_compare(
    pred: &ClusterAssignment,
    corpus: &Corpus,
) -> Result<DistributionComparison> {
    let mut predicted: HashMap<&str, usize> = HashMap::new();
    let mut truth: HashMap<&str, usize> = HashMap::new();
    let mut total = 0usize;
    for doc in &corpus.documents {
        let Some(t) = doc.true_label.as_deref() else {
            continue;
        };
        let p = pred
            .class_of(&doc.id)
            .ok_or_else(|| EvalError::Unassigned(doc.id.clone()))?;
        *predicted.entry(p).or_default() += 1;
        *truth.entry(t).or_default() += 1;
        total += 1;
    }
    if total == 0 {
        return Err(EvalError::NoTrueLabels);
    }
    let mut classes: Vec<&str> = pred.classes.iter().map(String::as_str).collect();
    let extra: BTreeSet<&str> = predicted
        .keys()
        .chain(truth.keys())
        .copied()
        .filter(|c| !classes.contains(c))
        .collect();
    classes.extend(extra);
    let n = total as f64;
    let rows: Vec<DistributionRow> = classes
        .into_iter()
        .map(|c| DistributionRow {
            class: c.to_owned(),
            predicted_fraction: predicted.get(c).copied().unwrap_or(0) as f64 / n,
            true_fraction: truth.get(c).copied().unwrap_or(0) as f64 / n,
        })
        .collect();
    // integer counts keep the distance exact for identical histograms
    let l1: usize = rows
        .iter()
        .map(|r| {
            let p = predicted.get(r.class.as_str()).copied().unwrap_or(0);
            let t = truth.get(r.class.as_str()).copied().unwrap_or(0);
            p.abs_diff(t)
        })
        .sum();
    Ok(DistributionComparison {
        rows,
        total_variation: l1 as f64 / (2.0 * n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn corpus(docs: &[&[&str]]) -> Corpus {
        Corpus::new(
            docs.iter()
                .enumerate()
                .map(|(i, toks)| Document {
                    id: format!("d{i}"),
                    raw_text: String::new(),
                    tokens: toks.iter().map(|s| s.to_string()).collect(),
                    true_label: None,
                })
                .collect(),
        )
        .unwrap()
    }

    fn topic(words: &[&str]) -> Topic {
        Topic {
            class_name: "T".into(),
            ranked: words.iter().map(|w| (w.to_string(), 0.1)).collect(),
            top_j: words.len(),
        }
    }

    fn cfg(n: usize) -> CoherenceConfig {
        CoherenceConfig {
            top_n_words: n,
            ..CoherenceConfig::default()
        }
    }

    // scans raw documents for every probability; no index
    fn oracle_pair(docs: &[Vec<String>], a: &str, b: &str) -> f64 {
        let m = docs.len() as f64;
        let has = |d: &Vec<String>, w: &str| d.iter().any(|t| t == w);
        let fa = docs.iter().filter(|d| has(d, a)).count() as f64;
        let fb = docs.iter().filter(|d| has(d, b)).count() as f64;
        let fab = docs.iter().filter(|d| has(d, a) && has(d, b)).count() as f64;
        if fab == 0.0 {
            -1.0
        } else if fab == m {
            1.0
        } else {
            ((fab / m) / ((fa / m) * (fb / m))).ln() / -(fab / m).ln()
        }
    }

    fn oracle_topic(docs: &[Vec<String>], words: &[String]) -> f64 {
        let mut sum = 0.0;
        let mut count = 0.0;
        for j in 1..words.len() {
            for i in 0..j {
                sum += oracle_pair(docs, &words[i], &words[j]);
                count += 1.0;
            }
        }
        sum / count
    }

    #[test]
    fn pair_hand_cases() {
        // P(a) = P(b) = P(ab) = 0.5
        let r = ReferenceStats::new(&corpus(&[&["aa", "bb"], &["cc"], &["aa", "bb"], &["dd"]])).unwrap();
        assert!((npmi_pair("aa", "bb", &r, -1.0).unwrap() - 1.0).abs() < 1e-12);

        // independent: P(a) = P(b) = 0.5, P(ab) = 0.25
        let r = ReferenceStats::new(&corpus(&[&["aa", "bb"], &["aa"], &["bb"], &["cc"]])).unwrap();
        assert!(npmi_pair("aa", "bb", &r, -1.0).unwrap().abs() < 1e-12);

        let r = ReferenceStats::new(&corpus(&[&["a", "b"], &["a", "b"], &["a", "c"], &["d"]])).unwrap();
        let expected = (4.0f64 / 3.0).ln() / 2f64.ln();
        assert!((npmi_pair("a", "b", &r, -1.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.41504).abs() < 1e-5);
        assert_eq!(npmi_pair("b", "c", &r, -1.0).unwrap(), -1.0);
        assert!(matches!(
            npmi_pair("a", "zz", &r, -1.0),
            Err(EvalError::WordNotInReference(w)) if w == "zz"
        ));
    }

    #[test]
    fn pair_in_every_document_scores_one() {
        let r = ReferenceStats::new(&corpus(&[&["x", "y"], &["x", "y", "z"]])).unwrap();
        assert_eq!(npmi_pair("x", "y", &r, -1.0).unwrap(), 1.0);
    }

    #[test]
    fn topic_hand_cases() {
        let r = ReferenceStats::new(&corpus(&[&["a", "b"], &["a", "b"], &["c"], &["d"]])).unwrap();
        assert!((npmi_topic(&topic(&["a", "b"]), &r, &cfg(2)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(npmi_topic(&topic(&["c", "d"]), &r, &cfg(2)).unwrap(), -1.0);
        assert!(matches!(
            npmi_topic(&topic(&["a", "b"]), &r, &cfg(3)),
            Err(EvalError::TopicTooShort { found: 2, needed: 3, .. })
        ));
        assert!(matches!(
            npmi_topic(&topic(&["a", "b"]), &r, &cfg(1)),
            Err(EvalError::InvalidTopN(1))
        ));
    }

    #[test]
    fn three_word_topic_over_six_documents() {
        let docs: [&[&str]; 6] = [
            &["x", "y", "z"],
            &["x", "y"],
            &["x", "w"],
            &["y", "z"],
            &["z"],
            &["w"],
        ];
        let r = ReferenceStats::new(&corpus(&docs)).unwrap();
        let raw: Vec<Vec<String>> = docs.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect();
        let pair = |a: &str, b: &str| {
            // P(x)=P(y)=P(z)=1/2, P(xy)=1/3, P(xz)=1/6, P(yz)=1/3
            let m = 6.0f64;
            let joint = match (a, b) {
                ("x", "y") | ("y", "z") => 2.0,
                _ => 1.0,
            };
            let p = joint / m;
            (p / 0.25).ln() / -p.ln()
        };
        let hand = (pair("x", "y") + pair("x", "z") + pair("y", "z")) / 3.0;
        let got = npmi_topic(&topic(&["x", "y", "z"]), &r, &cfg(3)).unwrap();
        assert!((got - hand).abs() < 1e-12);
        let words: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
        assert!((got - oracle_topic(&raw, &words)).abs() < 1e-12);

        let sum = npmi_topic(
            &topic(&["x", "y", "z"]),
            &r,
            &CoherenceConfig {
                aggregation: Aggregation::Sum,
                ..cfg(3)
            },
        )
        .unwrap();
        assert!((sum - 3.0 * hand).abs() < 1e-12);
    }

    #[test]
    fn words_missing_from_reference_are_skipped() {
        let r = ReferenceStats::new(&corpus(&[&["a", "b"], &["a", "b"], &["c"]])).unwrap();
        let t = topic(&["ghost", "a", "b"]);
        assert!((npmi_topic(&t, &r, &cfg(2)).unwrap() - 1.0).abs() < 1e-12);
    }

    fn report(scores: &[f64]) -> CoherenceReport {
        CoherenceReport::from_scores(
            scores
                .iter()
                .enumerate()
                .map(|(i, &s)| TopicScore {
                    class: format!("t{i}"),
                    npmi: s,
                })
                .collect(),
            CoherenceConfig::default(),
        )
    }

    #[test]
    fn report_statistics() {
        let one = report(&[0.3]);
        assert_eq!((one.mean, one.std), (0.3, 0.0));
        let two = report(&[0.2, 0.4]);
        assert!((two.mean - 0.3).abs() < 1e-12);
        assert!((two.std - 0.1).abs() < 1e-12);
    }

    #[test]
    fn top_fraction_cases() {
        let r = report(&[0.3, 0.1, -0.2, -0.4]);
        assert_eq!(top_fraction_filter(&r, 1.0).unwrap(), r);
        let half = top_fraction_filter(&r, 0.5).unwrap();
        let kept: Vec<f64> = half.per_topic.iter().map(|s| s.npmi).collect();
        assert_eq!(kept, vec![0.3, 0.1]);
        assert!((half.mean - 0.2).abs() < 1e-12);
        assert_eq!(top_fraction_filter(&report(&[0.1, 0.5, 0.2, 0.3, 0.4]), 0.5).unwrap().per_topic.len(), 3);
        assert_eq!(top_fraction_filter(&report(&[0.0; 10]), 0.3).unwrap().per_topic.len(), 3);
        assert!(top_fraction_filter(&r, 0.0).is_err());
        assert!(top_fraction_filter(&r, 1.5).is_err());
    }

    fn labeled(truth: &[&str]) -> Corpus {
        Corpus::new(
            truth
                .iter()
                .enumerate()
                .map(|(i, l)| Document {
                    id: format!("d{i}"),
                    raw_text: String::new(),
                    tokens: vec![],
                    true_label: Some(l.to_string()),
                })
                .collect(),
        )
        .unwrap()
    }

    fn assign(pred: &[&str], fixed: &[usize]) -> ClusterAssignment {
        ClusterAssignment::new(
            pred.iter().enumerate().map(|(i, p)| (format!("d{i}"), p.to_string())),
            vec![],
            fixed.iter().map(|i| format!("d{i}")).collect(),
        )
    }

    #[test]
    fn accuracy_cases() {
        let c = labeled(&["a", "b", "a", "b"]);
        assert_eq!(accuracy(&assign(&["a", "b", "a", "b"], &[]), &c).unwrap(), 1.0);
        assert_eq!(accuracy(&assign(&["b", "a", "b", "a"], &[]), &c).unwrap(), 0.0);

        // two training documents (one wrong on purpose) plus 10 held-out, 7 right
        let truth = ["a", "b", "a", "a", "a", "a", "a", "b", "b", "b", "b", "b"];
        let pred = ["b", "b", "a", "a", "a", "a", "b", "b", "b", "b", "a", "a"];
        assert!((accuracy(&assign(&pred, &[0, 1]), &labeled(&truth)).unwrap() - 0.7).abs() < 1e-12);

        assert!(matches!(accuracy(&assign(&["a"], &[0]), &labeled(&["a"])), Err(EvalError::NoHeldOut)));
        let unlabeled = corpus(&[&["x"]]);
        assert!(matches!(accuracy(&assign(&["a"], &[]), &unlabeled), Err(EvalError::NoTrueLabels)));
    }

    #[test]
    fn extracted_topic_count() {
        assert_eq!(count_extracted_topics(&assign(&["a", "b", "a", "c"], &[])), 3);
        let mut k = assign(&["a", "a"], &[]);
        k.classes.push("unused".into());
        assert_eq!(count_extracted_topics(&k), 1);
    }

    #[test]
    fn distribution_cases() {
        let c = labeled(&["a", "b", "a", "b"]);
        let same = topic_distribution_compare(&assign(&["a", "b", "a", "b"], &[]), &c).unwrap();
        assert_eq!(same.total_variation, 0.0);
        let skew = topic_distribution_compare(&assign(&["a", "a", "a", "a"], &[]), &c).unwrap();
        assert!((skew.total_variation - 0.5).abs() < 1e-12);
        assert_eq!(
            skew.to_csv(),
            "class,predicted_fraction,true_fraction\na,1.0,0.5\nb,0.0,0.5\n"
        );
    }

    proptest! {
        #[test]
        fn npmi_topic_matches_brute_force(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n_docs = rng.random_range(1..=50);
            let vocab = rng.random_range(10..=30);
            let docs: Vec<Vec<String>> = (0..n_docs)
                .map(|_| (0..rng.random_range(1..12)).map(|_| format!("w{}", rng.random_range(0..vocab))).collect())
                .collect();
            let c = Corpus::new(docs.iter().enumerate().map(|(i, t)| Document {
                id: format!("d{i}"), raw_text: String::new(), tokens: t.clone(), true_label: None,
            }).collect()).unwrap();
            let r = ReferenceStats::new(&c).unwrap();
            let mut present: Vec<String> = c.vocabulary.words().to_vec();
            if present.len() >= 2 {
                let n = present.len().min(10);
                // random order of words
                for i in (1..present.len()).rev() {
                    present.swap(i, rng.random_range(0..=i));
                }
                let words: Vec<&str> = present.iter().take(n).map(String::as_str).collect();
                let got = npmi_topic(&topic(&words), &r, &cfg(n)).unwrap();
                let want = oracle_topic(&docs, &present[..n]);
                prop_assert!((got - want).abs() < 1e-9);
                for a in &words {
                    for b in &words {
                        if a != b {
                            let ab = npmi_pair(a, b, &r, -1.0).unwrap();
                            prop_assert_eq!(ab, npmi_pair(b, a, &r, -1.0).unwrap());
                            prop_assert!((-1.0..=1.0 + 1e-12).contains(&ab));
                        }
                    }
                }
            }
        }

        #[test]
        fn filtered_mean_not_below_full_mean(
            scores in proptest::collection::vec(-1.0f64..1.0, 1..20),
            fraction in 0.01f64..=1.0,
        ) {
            let r = report(&scores);
            let f = top_fraction_filter(&r, fraction).unwrap();
            prop_assert!(f.mean >= r.mean - 1e-12);
        }

        #[test]
        fn accuracy_and_distance_are_order_free(
            pairs in proptest::collection::vec((0usize..3, 0usize..3), 1..30),
        ) {
            let names = ["a", "b", "c"];
            let truth: Vec<&str> = pairs.iter().map(|p| names[p.0]).collect();
            let pred: Vec<&str> = pairs.iter().map(|p| names[p.1]).collect();
            let c = labeled(&truth);
            let k = assign(&pred, &[]);
            let acc = accuracy(&k, &c).unwrap();
            let mut rev = c.clone();
            rev.documents.reverse();
            prop_assert_eq!(acc, accuracy(&k, &rev).unwrap());
            let d = topic_distribution_compare(&k, &c).unwrap();
            prop_assert!((0.0..=1.0).contains(&d.total_variation));
            prop_assert_eq!(d.total_variation == 0.0, d.rows.iter().all(|r| r.predicted_fraction == r.true_fraction));
            let sp: f64 = d.predicted().map(|(_, p)| p).sum();
            let st: f64 = d.truth().map(|(_, p)| p).sum();
            prop_assert!((sp - 1.0).abs() < 1e-9 && (st - 1.0).abs() < 1e-9);
        }
    }
}
