//! Corpus loading, preprocessing and vocabulary construction.
//!
//! Corpus files are UTF-8 JSONL with one `{"id", "text", "label"?}` record per
//! line. Loading keeps raw text only; [`preprocess`] fills in the token lists
//! and rebuilds the vocabulary.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pinned English stopword list shipped with the crate.
pub const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en_v1.txt");

/// Tokens shorter than this (in characters) are dropped.
pub const MIN_TOKEN_CHARS: usize = 3;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate document id {0:?}")]
    DuplicateId(String),
    #[error("corpus file contains no records")]
    EmptyFile,
    #[error("vocabulary is empty: every document has an empty token list")]
    EmptyVocabulary,
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
    pub true_label: Option<String>,
}

/// Sorted, deduplicated word list with a reverse index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds a vocabulary from arbitrary words; output is sorted and unique.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        let words: Vec<String> = set.into_iter().collect();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        Self { words, index }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub vocabulary: Vocabulary,
    /// Distinct true labels, sorted. `None` when no document carries a label.
    pub class_names: Option<Vec<String>>,
}

impl Corpus {
    /// Assembles a corpus from documents, checking id uniqueness.
    ///
    /// The vocabulary is built from whatever tokens the documents already
    /// carry (possibly none).
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(CorpusError::EmptyFile);
        }
        let mut seen = HashSet::with_capacity(documents.len());
        for doc in &documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId(doc.id.clone()));
            }
        }
        let vocabulary =
            Vocabulary::from_words(documents.iter().flat_map(|d| d.tokens.iter().cloned()));
        let class_names = collect_class_names(&documents);
        Ok(Self {
            documents,
            vocabulary,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    pub fn labeled_count(&self) -> usize {
        self.documents
            .iter()
            .filter(|d| d.true_label.is_some())
            .count()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.labeled_count() == self.documents.len()
    }
}

fn collect_class_names(documents: &[Document]) -> Option<Vec<String>> {
    let names: BTreeSet<&str> = documents
        .iter()
        .filter_map(|d| d.true_label.as_deref())
        .collect();
    if names.is_empty() {
        None
    } else {
        Some(names.into_iter().map(str::to_owned).collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

/// Reads a JSONL corpus file. Token lists are left empty.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let file = fs::File::open(path)?;
    parse_corpus(BufReader::new(file))
}

pub fn parse_corpus<R: Read>(reader: R) -> Result<Corpus> {
    let reader = BufReader::new(reader);
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId(record.id));
        }
        documents.push(Document {
            id: record.id,
            raw_text: record.text,
            tokens: Vec::new(),
            true_label: record.label,
        });
    }
    if documents.is_empty() {
        return Err(CorpusError::EmptyFile);
    }
    Corpus::new(documents)
}

/// Writes the corpus as JSONL. Documents with tokens are written with the
/// space-joined token list as their text, so a preprocessed corpus reloads
/// to the same tokens.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for doc in &corpus.documents {
        let text = if doc.tokens.is_empty() {
            doc.raw_text.clone()
        } else {
            doc.tokens.join(" ")
        };
        let record = Record {
            id: doc.id.clone(),
            text,
            label: doc.true_label.clone(),
        };
        serde_json::to_writer(&mut out, &record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Stopword set, normalized the same way as document text.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(normalize_token)
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Self::parse(&fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stopwords {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(
            iter.into_iter()
                .map(|w| normalize_token(&w.into()))
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }
}

// lowercase, then keep only alphabetic characters
fn normalize_token(s: &str) -> String {
    s.trim()
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic())
        .collect()
}

/// Splits raw text into filtered tokens.
///
/// Text is lowercased first. Every character that is neither alphabetic nor
/// whitespace is deleted in place (so `don't` becomes `dont`), the result is
/// split on whitespace, and tokens shorter than [`MIN_TOKEN_CHARS`] or in the
/// stopword set are dropped.
pub fn tokenize(text: &str, stopwords: &Stopwords) -> Vec<String> {
    let cleaned: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphabetic() || c.is_whitespace())
        .collect();
    cleaned
        .split_whitespace()
        .filter(|t| t.chars().count() >= MIN_TOKEN_CHARS && !stopwords.contains(t))
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub corpus: Corpus,
    /// Ids of documents whose token list came out empty.
    pub empty_documents: Vec<String>,
}

/// Tokenizes every document and rebuilds the vocabulary.
pub fn preprocess(corpus: &Corpus, stopwords: &Stopwords) -> Result<Preprocessed> {
    let mut empty_documents = Vec::new();
    let documents: Vec<Document> = corpus
        .documents
        .iter()
        .map(|doc| {
            let tokens = tokenize(&doc.raw_text, stopwords);
            if tokens.is_empty() {
                empty_documents.push(doc.id.clone());
            }
            Document {
                tokens,
                ..doc.clone()
            }
        })
        .collect();
    let vocabulary = build_vocabulary(&documents)?;
    Ok(Preprocessed {
        corpus: Corpus {
            documents,
            vocabulary,
            class_names: corpus.class_names.clone(),
        },
        empty_documents,
    })
}

pub fn build_vocabulary(documents: &[Document]) -> Result<Vocabulary> {
    let vocab = Vocabulary::from_words(documents.iter().flat_map(|d| d.tokens.iter().cloned()));
    if vocab.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    Ok(vocab)
}
