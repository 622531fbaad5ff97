//! Document and word embeddings in the EMB text format.
//!
//! ```text
//! #emb v1 dim=3
//! doc-1,0.25,-1.5,3.0
//! doc-2,0.0,0.125,1e-7
//! ```
//!
//! Values are written rounded to 9 significant digits, so a file written by
//! this module re-reads and re-writes byte-identically.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Deref;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;

pub const HEADER_PREFIX: &str = "#emb v1 dim=";

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: bad header, expected \"{HEADER_PREFIX}<L>\"")]
    BadHeader { line: usize },
    #[error("line {line}: expected {expected} values, found {found}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: could not parse value {value:?}")]
    BadValue { line: usize, value: String },
    #[error("line {line}: non-finite value")]
    NonFinite { line: usize },
    #[error("duplicate embedding id {0:?}")]
    DuplicateId(String),
    #[error("id {0:?} cannot be written (empty, or contains a comma or line break)")]
    InvalidId(String),
}

pub type Result<T> = std::result::Result<T, EmbeddingError>;

/// Fixed-dimension vectors keyed by id, kept in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f64>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedding dimension must be positive");
        Self {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), self.row(i)))
    }

    /// Appends a row. The line number in errors is 0 for programmatic inserts.
    pub fn push(&mut self, id: impl Into<String>, values: &[f64]) -> Result<()> {
        self.push_at(id.into(), values, 0)
    }

    fn push_at(&mut self, id: String, values: &[f64], line: usize) -> Result<()> {
        if values.len() != self.dim {
            return Err(EmbeddingError::DimMismatch {
                line,
                expected: self.dim,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { line });
        }
        if self.index.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(values);
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(fs::File::open(path)?)
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        let dim: usize = header
            .trim_end()
            .strip_prefix(HEADER_PREFIX)
            .and_then(|d| d.parse().ok())
            .filter(|&d| d > 0)
            .ok_or(EmbeddingError::BadHeader { line: 1 })?;
        let mut matrix = Self::new(dim);
        let mut values = Vec::with_capacity(dim);
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.trim_end().split(',');
            let id = fields.next().unwrap_or_default().to_owned();
            values.clear();
            for field in fields {
                let v: f64 = field.trim().parse().map_err(|_| EmbeddingError::BadValue {
                    line: lineno,
                    value: field.to_owned(),
                })?;
                values.push(v);
            }
            matrix.push_at(id, &values, lineno)?;
        }
        Ok(matrix)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{HEADER_PREFIX}{}", self.dim)?;
        for (id, row) in self.iter() {
            write_row(&mut out, id, row)?;
        }
        Ok(())
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }
}

pub(crate) fn write_row<W: Write>(out: &mut W, id: &str, row: &[f64]) -> Result<()> {
    if id.is_empty() || id.contains([',', '\n', '\r']) {
        return Err(EmbeddingError::InvalidId(id.to_owned()));
    }
    out.write_all(id.as_bytes())?;
    for &v in row {
        write!(out, ",{}", format_value(v))?;
    }
    out.write_all(b"\n")?;
    Ok(())
}

/// Rounds to 9 significant digits and prints the shortest representation
/// of the rounded value.
pub fn format_value(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    format!("{rounded:?}")
}

/// Word vectors sharing the document embedding space.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingMatrix(pub EmbeddingMatrix);

impl WordEmbeddingMatrix {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        EmbeddingMatrix::read(path).map(Self)
    }
}

impl Deref for WordEmbeddingMatrix {
    type Target = EmbeddingMatrix;
    fn deref(&self) -> &EmbeddingMatrix {
        &self.0
    }
}

/// Id mismatches between a corpus and an embedding matrix.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct AlignmentReport {
    /// Corpus documents without an embedding row.
    pub missing: Vec<String>,
    /// Embedding rows without a corpus document.
    pub extra: Vec<String>,
}

impl AlignmentReport {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty()
    }
}

pub fn align(corpus: &Corpus, emb: &EmbeddingMatrix) -> AlignmentReport {
    let missing = corpus
        .documents
        .iter()
        .filter(|d| emb.get(&d.id).is_none())
        .map(|d| d.id.clone())
        .collect();
    let doc_ids: BTreeSet<&str> = corpus.documents.iter().map(|d| d.id.as_str()).collect();
    let extra = emb
        .ids()
        .iter()
        .filter(|id| !doc_ids.contains(id.as_str()))
        .cloned()
        .collect();
    AlignmentReport { missing, extra }
}

/// Drops corpus documents that have no embedding row. Returns `None` if no
/// document survives.
pub fn drop_unmatched(corpus: &Corpus, emb: &EmbeddingMatrix) -> Option<Corpus> {
    let documents: Vec<_> = corpus
        .documents
        .iter()
        .filter(|d| emb.get(&d.id).is_some())
        .cloned()
        .collect();
    if documents.is_empty() {
        return None;
    }
    let vocabulary = crate::corpus::Vocabulary::from_words(
        documents.iter().flat_map(|d| d.tokens.iter().cloned()),
    );
    let mut out = Corpus::new(documents).ok()?;
    out.vocabulary = vocabulary;
    Some(out)
}
