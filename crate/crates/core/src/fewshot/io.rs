//! Head files: one JSON header line followed by EMB-style rows.
//!
//! Projection rows are `r<i>,w_i1,...,w_iL`. Classifier rows are
//! `c<i>,bias_i,w_i1,...,w_iL`, with class names carried in the header.
//! Values are written at full round-trip precision so a reloaded head
//! predicts exactly like the in-memory one.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    ClassifierConfig, ClassifierHead, FewShotError, ProjectionConfig, ProjectionHead, Result,
};
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadHeader {
    pub kind: String,
    pub classes: Vec<String>,
    pub dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    #[serde(default)]
    pub training_log: Vec<f64>,
}

fn malformed(line: usize, message: impl Into<String>) -> FewShotError {
    FewShotError::Malformed {
        line,
        message: message.into(),
    }
}

fn write_rows<W: Write>(mut out: W, header: &HeadHeader, rows: &[(String, Vec<f64>)]) -> Result<()> {
    serde_json::to_writer(&mut out, header).map_err(std::io::Error::from)?;
    out.write_all(b"\n")?;
    for (key, values) in rows {
        out.write_all(key.as_bytes())?;
        for v in values {
            write!(out, ",{v:?}")?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Parses the header and the numeric rows (keys are checked, then dropped).
fn read_rows<R: Read>(reader: R, prefix: char, width: impl Fn(&HeadHeader) -> usize) -> Result<(HeadHeader, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(reader).lines();
    let first = lines.next().transpose()?.ok_or_else(|| malformed(1, "empty head file"))?;
    let header: HeadHeader =
        serde_json::from_str(&first).map_err(|e| malformed(1, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let key = fields.next().unwrap_or_default();
        if key != format!("{prefix}{}", rows.len()) {
            return Err(malformed(lineno, format!("unexpected row key {key:?}")));
        }
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|_| malformed(lineno, format!("bad value {f:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != width(&header) {
            return Err(malformed(lineno, format!("expected {} values", width(&header))));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(malformed(lineno, "non-finite value"));
        }
        rows.push(values);
    }
    Ok((header, rows))
}

pub fn read_head_header(path: impl AsRef<Path>) -> Result<HeadHeader> {
    let file = fs::File::open(path)?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first)?;
    serde_json::from_str(first.trim_end()).map_err(|e| malformed(1, e.to_string()))
}

impl ProjectionHead {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let header = HeadHeader {
            kind: "projection".into(),
            classes: Vec::new(),
            dim: self.dim(),
            epochs: self.config.epochs,
            lr: self.config.lr,
            seed: self.config.seed,
            training_log: self.training_log.clone(),
        };
        let rows: Vec<_> = (0..self.weight.rows())
            .map(|r| (format!("r{r}"), self.weight.row(r).to_vec()))
            .collect();
        write_rows(out, &header, &rows)
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let (header, rows) = read_rows(reader, 'r', |h| h.dim)?;
        if header.kind != "projection" {
            return Err(malformed(1, format!("expected a projection head, found {:?}", header.kind)));
        }
        if rows.len() != header.dim {
            return Err(malformed(rows.len() + 1, format!("expected {} rows", header.dim)));
        }
        Ok(Self {
            weight: Matrix::from_rows(header.dim, header.dim, rows.concat()),
            training_log: header.training_log,
            config: ProjectionConfig {
                epochs: header.epochs,
                lr: header.lr,
                seed: header.seed,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(fs::File::open(path)?)
    }
}

impl ClassifierHead {
    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let header = HeadHeader {
            kind: "classifier".into(),
            classes: self.classes.clone(),
            dim: self.dim(),
            epochs: self.config.epochs,
            lr: self.config.lr,
            seed: self.config.seed,
            training_log: self.training_log.clone(),
        };
        let rows: Vec<_> = (0..self.classes.len())
            .map(|c| {
                let mut values = vec![self.bias[c]];
                values.extend_from_slice(self.weights.row(c));
                (format!("c{c}"), values)
            })
            .collect();
        write_rows(out, &header, &rows)
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let (header, rows) = read_rows(reader, 'c', |h| h.dim + 1)?;
        if header.kind != "classifier" {
            return Err(malformed(1, format!("expected a classifier head, found {:?}", header.kind)));
        }
        if rows.len() != header.classes.len() || rows.is_empty() {
            return Err(malformed(rows.len() + 1, format!("expected {} rows", header.classes.len())));
        }
        let bias = rows.iter().map(|r| r[0]).collect();
        let data = rows.iter().flat_map(|r| r[1..].iter().copied()).collect();
        Ok(Self {
            weights: Matrix::from_rows(header.classes.len(), header.dim, data),
            classes: header.classes,
            bias,
            training_log: header.training_log,
            config: ClassifierConfig {
                epochs: header.epochs,
                lr: header.lr,
                seed: header.seed,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(fs::File::open(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heads_reload_exactly() {
        let proj = ProjectionHead {
            weight: Matrix::from_rows(2, 2, vec![1.0, 1.0 / 3.0, -2.5e-17, 0.9]),
            training_log: vec![0.5, 0.25],
            config: ProjectionConfig {
                epochs: 2,
                lr: 2e-5,
                seed: 7,
            },
        };
        let mut buf = Vec::new();
        proj.write(&mut buf).unwrap();
        assert_eq!(ProjectionHead::parse(buf.as_slice()).unwrap(), proj);

        let head = ClassifierHead {
            classes: vec!["a,b".into(), "c".into()],
            weights: Matrix::from_rows(2, 2, vec![0.1, 0.2, 0.3, std::f64::consts::PI]),
            bias: vec![-1.0, 1.0],
            training_log: vec![0.7],
            config: ClassifierConfig {
                epochs: 1,
                lr: 1.0,
                seed: 3,
            },
        };
        let mut buf = Vec::new();
        head.write(&mut buf).unwrap();
        assert_eq!(ClassifierHead::parse(buf.as_slice()).unwrap(), head);
        assert!(ProjectionHead::parse(buf.as_slice()).is_err());
    }

    #[test]
    fn truncated_head_rejected() {
        let text = "{\"kind\":\"projection\",\"classes\":[],\"dim\":2,\"epochs\":1,\"lr\":0.1,\"seed\":0}\nr0,1.0,0.0\n";
        assert!(ProjectionHead::parse(text.as_bytes()).is_err());
    }
}
