//! Planted-cluster corpora for tests and demos.
//!
//! Each class gets a Gaussian cluster in embedding space, with means on
//! distinct coordinate axes so every pair of means is exactly
//! `separation · sigma` apart, and an exclusive themed vocabulary. Documents
//! mix mostly class words with a few shared filler words and stopwords, with
//! capitalization and punctuation left in so preprocessing has work to do.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::{Corpus, Document};
use crate::embedding::{EmbeddingMatrix, WordEmbeddingMatrix};

const THEMES: [(&str, [&str; 10]); 8] = [
    ("space", ["orbit", "rocket", "launch", "satellite", "astronaut", "galaxy", "planet", "telescope", "lunar", "comet"]),
    ("sports", ["football", "match", "goal", "league", "striker", "referee", "tournament", "coach", "stadium", "season"]),
    ("music", ["guitar", "album", "concert", "melody", "singer", "band", "chorus", "rhythm", "piano", "lyrics"]),
    ("finance", ["stock", "market", "investor", "bank", "inflation", "bond", "dividend", "currency", "equity", "profit"]),
    ("health", ["patient", "doctor", "disease", "vaccine", "hospital", "clinic", "therapy", "nurse", "symptom", "cancer"]),
    ("cooking", ["recipe", "flour", "oven", "garlic", "sauce", "butter", "kitchen", "baking", "pepper", "onion"]),
    ("weather", ["storm", "rainfall", "forecast", "humidity", "thunder", "drought", "snowfall", "tornado", "breeze", "cloudy"]),
    ("law", ["court", "judge", "lawyer", "verdict", "trial", "statute", "appeal", "jury", "lawsuit", "attorney"]),
];

const SHARED: [&str; 10] = [
    "report", "week", "today", "people", "group", "local", "public", "number", "recent", "major",
];

const FILLER_STOPWORDS: [&str; 6] = ["the", "and", "of", "to", "in", "is"];

pub const MAX_CLASSES: usize = THEMES.len();

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub classes: usize,
    pub docs_per_class: usize,
    pub dim: usize,
    /// Distance between cluster means in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    pub class_words_per_doc: usize,
    pub shared_words_per_doc: usize,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            classes: 5,
            docs_per_class: 40,
            dim: 32,
            separation: 12.0,
            sigma: 1.0,
            class_words_per_doc: 9,
            shared_words_per_doc: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedFixture {
    /// Raw, unpreprocessed corpus with true labels.
    pub corpus: Corpus,
    pub embeddings: EmbeddingMatrix,
    pub word_embeddings: WordEmbeddingMatrix,
    pub class_vocab: BTreeMap<String, Vec<String>>,
}

impl PlantedFixture {
    pub fn class_of_word(&self, word: &str) -> Option<&str> {
        self.class_vocab
            .iter()
            .find(|(_, words)| words.iter().any(|w| w == word))
            .map(|(c, _)| c.as_str())
    }
}

pub fn planted(config: &PlantedConfig) -> PlantedFixture {
    assert!(
        (1..=MAX_CLASSES).contains(&config.classes),
        "planted fixtures support 1..={MAX_CLASSES} classes"
    );
    assert!(config.dim >= config.classes, "need one axis per class");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.sigma).expect("sigma must be positive");
    let offset = config.separation * config.sigma / std::f64::consts::SQRT_2;
    let mean = |c: usize| -> Vec<f64> {
        let mut m = vec![0.0; config.dim];
        m[c] = offset;
        m
    };

    let mut docs = Vec::with_capacity(config.classes * config.docs_per_class);
    for (c, (class, words)) in THEMES.iter().take(config.classes).enumerate() {
        for _ in 0..config.docs_per_class {
            let mut tokens: Vec<&str> = (0..config.class_words_per_doc)
                .map(|_| *words.choose(&mut rng).expect("non-empty theme"))
                .collect();
            tokens.extend((0..config.shared_words_per_doc).map(|_| *SHARED.choose(&mut rng).expect("non-empty")));
            tokens.extend((0..2).map(|_| *FILLER_STOPWORDS.choose(&mut rng).expect("non-empty")));
            tokens.shuffle(&mut rng);
            let mut text = tokens.join(" ");
            if let Some(first) = text.get(..1) {
                text = first.to_uppercase() + &text[1..];
            }
            text.push_str(&format!(", {}.", rng.random_range(1..100)));
            let vector: Vec<f64> = mean(c).iter().map(|m| m + noise.sample(&mut rng)).collect();
            docs.push((class.to_string(), text, vector));
        }
    }
    docs.shuffle(&mut rng);

    let mut embeddings = EmbeddingMatrix::new(config.dim);
    let mut documents = Vec::with_capacity(docs.len());
    for (i, (class, text, vector)) in docs.into_iter().enumerate() {
        let id = format!("doc{i:04}");
        embeddings.push(id.clone(), &vector).expect("finite, unique");
        documents.push(Document {
            id,
            raw_text: text,
            tokens: Vec::new(),
            true_label: Some(class),
        });
    }

    let word_noise = Normal::new(0.0, 0.3 * config.sigma).expect("positive");
    let mut words = EmbeddingMatrix::new(config.dim);
    let mut class_vocab = BTreeMap::new();
    for (c, (class, theme)) in THEMES.iter().take(config.classes).enumerate() {
        for w in theme {
            let v: Vec<f64> = mean(c).iter().map(|m| m + word_noise.sample(&mut rng)).collect();
            words.push(*w, &v).expect("unique words");
        }
        class_vocab.insert(class.to_string(), theme.iter().map(|w| w.to_string()).collect());
    }
    for w in SHARED {
        let v: Vec<f64> = (0..config.dim).map(|_| word_noise.sample(&mut rng)).collect();
        words.push(w, &v).expect("unique words");
    }

    PlantedFixture {
        corpus: Corpus::new(documents).expect("unique ids"),
        embeddings,
        word_embeddings: WordEmbeddingMatrix(words),
        class_vocab,
    }
}
