//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use fewtopic::corpus::{Corpus, Document};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Cross-class pairs by explicit enumeration over `k` classes of `n` items.
pub fn enumerate_cross_pairs(k: usize, n: usize) -> u64 {
    let items: Vec<usize> = (0..k * n).map(|i| i / n).collect();
    let mut count = 0;
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if items[i] != items[j] {
                count += 1;
            }
        }
    }
    count
}

pub fn corpus_from_tokens(docs: &[Vec<String>]) -> Corpus {
    let documents = docs
        .iter()
        .enumerate()
        .map(|(i, tokens)| Document {
            id: format!("d{i}"),
            raw_text: tokens.join(" "),
            tokens: tokens.clone(),
            true_label: None,
        })
        .collect();
    Corpus::new(documents).unwrap()
}

/// Random token documents over a vocabulary of `w0..w{vocab}`.
pub fn random_docs(rng: &mut impl Rng, max_docs: usize, max_vocab: usize) -> Vec<Vec<String>> {
    let vocab: Vec<String> = (0..rng.random_range(2..=max_vocab)).map(|i| format!("w{i:02}")).collect();
    (0..rng.random_range(1..=max_docs))
        .map(|_| {
            let len = rng.random_range(1..=12);
            (0..len).map(|_| vocab.choose(rng).unwrap().clone()).collect()
        })
        .collect()
}

/// NPMI averaged over all unordered pairs of `words`, counting documents by
/// direct scan. Conventions: a pair seen in no document scores `zero_value`,
/// a pair seen in every document scores 1.
pub fn npmi_oracle(docs: &[Vec<String>], words: &[&str], zero_value: f64) -> f64 {
    let sets: Vec<HashSet<&str>> = docs.iter().map(|d| d.iter().map(String::as_str).collect()).collect();
    let m = docs.len() as f64;
    let df = |w: &str| sets.iter().filter(|s| s.contains(w)).count() as f64;
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..words.len() {
        for j in i + 1..words.len() {
            let joint = sets.iter().filter(|s| s.contains(words[i]) && s.contains(words[j])).count() as f64;
            let score = if joint == 0.0 {
                zero_value
            } else if joint == m {
                1.0
            } else {
                let pij = joint / m;
                let pmi = (pij / ((df(words[i]) / m) * (df(words[j]) / m))).ln();
                pmi / -pij.ln()
            };
            total += score;
            pairs += 1;
        }
    }
    total / pairs as f64
}

/// Central finite-difference gradient of `f` at `x`.
pub fn numeric_grad(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or the absolute difference when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let l2 = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = l2(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = l2(&mut a.iter().copied()).max(l2(&mut b.iter().copied()));
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Every file under `dir`, keyed by relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let key = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(key, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub fn fixture_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixture")
}
