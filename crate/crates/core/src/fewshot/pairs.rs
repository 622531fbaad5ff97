use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FewShotError, LabeledSet, Result};

/// Number of distinct cross-class document pairs for `k` classes of `n`
/// samples each: `Σ_{i=1}^{k-1} n·(k−i)·n`.
pub fn pair_count(k: u64, n: u64) -> u64 {
    (1..k).map(|i| n * (k - i) * n).sum()
}

/// Distinct cross-class pairs for arbitrary class sizes, `Σ_{a<b} n_a·n_b`.
/// Equals [`pair_count`] when all sizes are equal.
pub fn cross_pair_bound(class_sizes: &[usize]) -> u64 {
    let mut total = 0u64;
    let mut seen = 0u64;
    for &size in class_sizes {
        total += seen * size as u64;
        seen += size as u64;
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastivePair {
    pub id_a: String,
    pub id_b: String,
    /// 1.0 for a same-class pair, 0.0 otherwise.
    pub label: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Same-class positives and cross-class negatives, half each where possible.
    #[default]
    Mixed,
    /// Cross-class pairs only.
    CrossOnly,
}

/// Summary of the pair budget for a labeled set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PairPlan {
    pub k: usize,
    /// Samples per class when the set is balanced.
    pub n_per_class: Option<usize>,
    pub max_cross_pairs: u64,
    pub pairs_per_sample_cap: usize,
}

impl PairPlan {
    pub fn for_labeled(labeled: &LabeledSet, cap: usize) -> Self {
        let sizes: Vec<usize> = group_by_class(labeled).values().map(Vec::len).collect();
        let balanced = sizes.windows(2).all(|w| w[0] == w[1]);
        Self {
            k: sizes.len(),
            n_per_class: if balanced { sizes.first().copied() } else { None },
            max_cross_pairs: cross_pair_bound(&sizes),
            pairs_per_sample_cap: cap,
        }
    }
}

fn group_by_class(labeled: &LabeledSet) -> BTreeMap<&str, Vec<&str>> {
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, class) in &labeled.entries {
        groups.entry(class.as_str()).or_default().push(id.as_str());
    }
    groups
}

fn key<'a>(a: &'a str, b: &'a str) -> (&'a str, &'a str) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Builds up to `cap` contrastive pairs per labeled sample.
///
/// Each sample aims for `cap / 2` same-class partners and the rest from other
/// classes, filling from the other kind when one runs out. Partners are drawn
/// uniformly from the candidates and no unordered pair is emitted twice, so
/// the cross-class count never exceeds [`cross_pair_bound`].
pub fn build_pairs(
    labeled: &LabeledSet,
    cap: usize,
    seed: u64,
    mode: PairMode,
) -> Result<Vec<ContrastivePair>> {
    if cap == 0 {
        return Err(FewShotError::ZeroCap);
    }
    let groups = group_by_class(labeled);
    if groups.len() < 2 {
        return Err(FewShotError::SingleClass(groups.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: HashSet<(&str, &str)> = HashSet::new();
    let mut pairs = Vec::new();

    for (anchor, class) in &labeled.entries {
        let anchor = anchor.as_str();
        let mut positives: Vec<&str> = groups[class.as_str()]
            .iter()
            .copied()
            .filter(|&id| id != anchor && !used.contains(&key(anchor, id)))
            .collect();
        let mut negatives: Vec<&str> = groups
            .iter()
            .filter(|(c, _)| **c != class.as_str())
            .flat_map(|(_, ids)| ids.iter().copied())
            .filter(|&id| !used.contains(&key(anchor, id)))
            .collect();
        positives.shuffle(&mut rng);
        negatives.shuffle(&mut rng);
        if mode == PairMode::CrossOnly {
            positives.clear();
        }

        let want_pos = (cap / 2).min(positives.len());
        let want_neg = (cap - want_pos).min(negatives.len());
        let want_pos = (cap - want_neg).min(positives.len());

        for &partner in &positives[..want_pos] {
            used.insert(key(anchor, partner));
            pairs.push(ContrastivePair {
                id_a: anchor.to_owned(),
                id_b: partner.to_owned(),
                label: 1.0,
            });
        }
        for &partner in &negatives[..want_neg] {
            used.insert(key(anchor, partner));
            pairs.push(ContrastivePair {
                id_a: anchor.to_owned(),
                id_b: partner.to_owned(),
                label: 0.0,
            });
        }
    }
    Ok(pairs)
}
