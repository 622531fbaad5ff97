use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use fewtopic::corpus::{self, Corpus, CorpusError, Stopwords};
use fewtopic::embedding::{self, EmbeddingError, EmbeddingMatrix, WordEmbeddingMatrix};
use fewtopic::eval::{self, Aggregation, EvalError, ReferenceStats};
use fewtopic::fewshot::{
    self, ClassifierConfig, ClassifierHead, ContrastivePair, FewShotError, LabeledSet, PairMode,
    ProjectionConfig, ProjectionHead,
};
use fewtopic::pipeline::{self, Extraction, Inputs, LabelMode, PipelineError, RunConfig};
use fewtopic::synthetic::{self, PlantedConfig};
use fewtopic::topics::{ClusterAssignment, TopicError, TopicSet};

#[derive(Parser)]
#[command(name = "fewtopic", version, about = "Few-shot document classification and topic extraction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize a corpus and write it back with normalized text.
    Preprocess {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Check that a corpus and an embedding file cover the same ids.
    EmbedCheck {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
    },
    /// Draw the labeled training set.
    Sample {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        mode: ModeArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build contrastive pairs from a labeled set.
    Pairs {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long, default_value_t = fewshot::DEFAULT_PAIRS_PER_SAMPLE)]
        pairs_per_sample: usize,
        #[arg(long, value_enum, default_value_t = PairModeArg::Mixed)]
        pair_mode: PairModeArg,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the projection head and the classifier head.
    Train {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Pairs file; built from the labeled set when omitted.
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = fewshot::DEFAULT_PAIRS_PER_SAMPLE)]
        pairs_per_sample: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = fewshot::DEFAULT_EPOCHS)]
        epochs: usize,
        #[arg(long, default_value_t = fewshot::DEFAULT_LEARNING_RATE)]
        lr: f64,
        #[arg(long, default_value_t = ClassifierConfig::default().epochs)]
        head_epochs: usize,
        #[arg(long, default_value_t = ClassifierConfig::default().lr)]
        head_lr: f64,
        #[arg(long)]
        out_projection: PathBuf,
        #[arg(long)]
        out_classifier: PathBuf,
    },
    /// Assign every document to a class.
    Predict {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        projection: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        /// Labeled documents keep their given class.
        #[arg(long)]
        labeled: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract one topic per predicted class.
    Extract {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        assignment: PathBuf,
        #[arg(long, default_value_t = fewtopic::topics::DEFAULT_TOP_J)]
        top_j: usize,
        #[arg(long, value_enum, default_value_t = ExtractionArg::Tfidf)]
        extraction: ExtractionArg,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        word_embeddings: Option<PathBuf>,
        #[arg(long)]
        projection: Option<PathBuf>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score topics with NPMI against the corpus.
    Coherence {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        topics: PathBuf,
        #[arg(long, default_value_t = eval::DEFAULT_TOP_N_WORDS)]
        coherence_n: usize,
        #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
        aggregation: AggregationArg,
        #[arg(long)]
        top_fraction: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a run bundle, recomputing the aggregate from per-run files.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
    /// Run the whole pipeline for several seeds and write a bundle.
    Run(RunArgs),
    /// Score topics built from the true labels.
    Oracle(RunArgs),
    /// Write a planted-cluster corpus with document and word embeddings.
    Synth {
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 40)]
        docs_per_class: usize,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 12.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModeArgs {
    /// Sample this many labeled documents per class.
    #[arg(long)]
    per_class: Option<usize>,
    /// Draw this many labeled documents uniformly.
    #[arg(long)]
    random_draw: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    word_embeddings: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long, conflicts_with = "random_draw")]
    per_class: Option<usize>,
    #[arg(long)]
    random_draw: Option<usize>,
    /// Base seed; run k uses seed + k. Required for `run`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    pairs_per_sample: Option<usize>,
    #[arg(long, value_enum)]
    pair_mode: Option<PairModeArg>,
    #[arg(long)]
    head_epochs: Option<usize>,
    #[arg(long)]
    head_lr: Option<f64>,
    #[arg(long)]
    top_j: Option<usize>,
    #[arg(long)]
    coherence_n: Option<usize>,
    #[arg(long, value_enum)]
    aggregation: Option<AggregationArg>,
    #[arg(long, value_enum)]
    extraction: Option<ExtractionArg>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    top_fraction: Option<f64>,
    #[arg(long)]
    drop_unmatched: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairModeArg {
    Mixed,
    CrossOnly,
}

impl From<PairModeArg> for PairMode {
    fn from(m: PairModeArg) -> Self {
        match m {
            PairModeArg::Mixed => PairMode::Mixed,
            PairModeArg::CrossOnly => PairMode::CrossOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractionArg {
    Tfidf,
    Centroid,
}

impl From<ExtractionArg> for Extraction {
    fn from(e: ExtractionArg) -> Self {
        match e {
            ExtractionArg::Tfidf => Extraction::Tfidf,
            ExtractionArg::Centroid => Extraction::Centroid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregationArg {
    Mean,
    Sum,
}

impl From<AggregationArg> for Aggregation {
    fn from(a: AggregationArg) -> Self {
        match a {
            AggregationArg::Mean => Aggregation::Mean,
            AggregationArg::Sum => Aggregation::Sum,
        }
    }
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident <- $value:expr),* $(,)?) => {
                $(if let Some(v) = $value { cfg.$field = v.into(); })*
            };
        }
        set! {
            corpus_path <- self.corpus,
            embeddings_path <- self.embeddings,
            seed <- self.seed,
            epochs <- self.epochs,
            lr <- self.lr,
            pairs_per_sample <- self.pairs_per_sample,
            pair_mode <- self.pair_mode,
            head_epochs <- self.head_epochs,
            head_lr <- self.head_lr,
            top_j <- self.top_j,
            coherence_n <- self.coherence_n,
            aggregation <- self.aggregation,
            extraction <- self.extraction,
            runs <- self.runs,
            top_fraction <- self.top_fraction,
            output_dir <- self.output_dir,
        }
        if let Some(p) = self.word_embeddings {
            cfg.word_embeddings_path = Some(p);
        }
        if let Some(p) = self.stopwords {
            cfg.stopwords_path = Some(p);
        }
        if let Some(n) = self.per_class {
            cfg.mode = LabelMode::PerClass(n);
        }
        if let Some(i) = self.random_draw {
            cfg.mode = LabelMode::RandomDraw(i);
        }
        if self.drop_unmatched {
            cfg.drop_unmatched = true;
        }
        if cfg.corpus_path.as_os_str().is_empty() || cfg.embeddings_path.as_os_str().is_empty() {
            return Err(PipelineError::Config("corpus and embeddings paths are required".into()).into());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn stopwords(path: Option<&Path>) -> Result<Stopwords> {
    Ok(match path {
        Some(p) => Stopwords::load(p)?,
        None => Stopwords::english(),
    })
}

/// Loads and tokenizes a corpus; tokenizing twice is harmless.
fn load_preprocessed(path: &Path, sw: &Stopwords) -> Result<Corpus> {
    let raw = corpus::load_corpus(path).with_context(|| format!("reading corpus {}", path.display()))?;
    Ok(corpus::preprocess(&raw, sw)?.corpus)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn read_pairs(path: &Path) -> Result<Vec<ContrastivePair>> {
    let file = fs::File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        pairs.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(pairs)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Preprocess { corpus: path, out, stopwords: sw } => {
            let raw = corpus::load_corpus(&path).with_context(|| format!("reading corpus {}", path.display()))?;
            let pre = corpus::preprocess(&raw, &stopwords(sw.as_deref())?)?;
            let mut buf = Vec::new();
            corpus::write_corpus(&pre.corpus, &mut buf)?;
            write_file(&out, buf)?;
            print_json(&json!({
                "documents": pre.corpus.len(),
                "vocabulary": pre.corpus.vocabulary.len(),
                "empty_documents": pre.empty_documents,
                "classes": pre.corpus.class_names,
            }))
        }
        Command::EmbedCheck { corpus: path, embeddings } => {
            let corpus = corpus::load_corpus(&path)?;
            let emb = EmbeddingMatrix::read(&embeddings)?;
            let report = embedding::align(&corpus, &emb);
            print_json(&json!({ "dim": emb.dim(), "rows": emb.len(), "alignment": report }))?;
            if !report.is_empty() {
                return Err(PipelineError::Alignment(report).into());
            }
            Ok(())
        }
        Command::Sample { corpus: path, mode, seed, out } => {
            let corpus = corpus::load_corpus(&path)?;
            let labeled = match (mode.per_class, mode.random_draw) {
                (Some(n), _) => fewshot::sample_per_class(&corpus, n, seed)?,
                (_, Some(i)) => fewshot::sample_random_draw(&corpus, i, seed)?,
                _ => unreachable!("clap requires one sampling mode"),
            };
            let mut buf = Vec::new();
            labeled.write(&mut buf)?;
            write_file(&out, buf)?;
            print_json(&json!({ "labeled": labeled.len(), "classes": labeled.classes() }))
        }
        Command::Pairs { labeled, pairs_per_sample, pair_mode, seed, out } => {
            let labeled = LabeledSet::read(&labeled)?;
            let pairs = fewshot::build_pairs(&labeled, pairs_per_sample, seed, pair_mode.into())?;
            let mut buf = String::new();
            for p in &pairs {
                buf.push_str(&serde_json::to_string(p)?);
                buf.push('\n');
            }
            write_file(&out, buf)?;
            let positives = pairs.iter().filter(|p| p.label == 1.0).count();
            print_json(&json!({
                "pairs": pairs.len(),
                "positives": positives,
                "negatives": pairs.len() - positives,
                "plan": fewshot::PairPlan::for_labeled(&labeled, pairs_per_sample),
            }))
        }
        Command::Train {
            labeled,
            embeddings,
            pairs,
            pairs_per_sample,
            seed,
            epochs,
            lr,
            head_epochs,
            head_lr,
            out_projection,
            out_classifier,
        } => {
            let labeled = LabeledSet::read(&labeled)?;
            let emb = EmbeddingMatrix::read(&embeddings)?;
            let projection = if labeled.classes().len() < 2 {
                ProjectionHead::identity(emb.dim())
            } else {
                let pairs = match pairs {
                    Some(p) => read_pairs(&p)?,
                    None => fewshot::build_pairs(&labeled, pairs_per_sample, seed, PairMode::Mixed)?,
                };
                fewshot::train_projection(&pairs, &emb, ProjectionConfig { epochs, lr, seed })?
            };
            let head = fewshot::train_classifier(
                &labeled,
                &emb,
                &projection,
                ClassifierConfig { epochs: head_epochs, lr: head_lr, seed },
            )?;
            projection.save(&out_projection)?;
            head.save(&out_classifier)?;
            print_json(&json!({
                "projection_loss": projection.training_log,
                "classifier_loss": head.training_log,
                "classes": head.classes,
            }))
        }
        Command::Predict { corpus: path, embeddings, projection, classifier, labeled, out } => {
            let corpus = corpus::load_corpus(&path)?;
            let emb = EmbeddingMatrix::read(&embeddings)?;
            let proj = ProjectionHead::load(&projection)?;
            let head = ClassifierHead::load(&classifier)?;
            let labeled = labeled.map(LabeledSet::read).transpose()?;
            let assignment = fewshot::predict(&corpus, &emb, &proj, &head, labeled.as_ref())?;
            write_json(&out, &assignment)?;
            print_json(&json!({
                "extracted_topics": eval::count_extracted_topics(&assignment),
                "class_sizes": assignment.class_sizes(),
            }))
        }
        Command::Extract {
            corpus: path,
            assignment,
            top_j,
            extraction,
            embeddings,
            word_embeddings,
            projection,
            stopwords: sw,
            out,
        } => {
            let corpus = load_preprocessed(&path, &stopwords(sw.as_deref())?)?;
            let clusters: ClusterAssignment = serde_json::from_str(&fs::read_to_string(&assignment)?)?;
            let extraction: Extraction = extraction.into();
            let (emb, words) = match extraction {
                Extraction::Tfidf => (EmbeddingMatrix::new(1), None),
                Extraction::Centroid => {
                    let (Some(e), Some(w)) = (embeddings, word_embeddings) else {
                        bail!(PipelineError::Config(
                            "centroid extraction needs --embeddings and --word-embeddings".into()
                        ));
                    };
                    (EmbeddingMatrix::read(&e)?, Some(WordEmbeddingMatrix::read(&w)?))
                }
            };
            let proj = match projection {
                Some(p) => ProjectionHead::load(&p)?,
                None => ProjectionHead::identity(emb.dim()),
            };
            let inputs = Inputs {
                corpus,
                embeddings: emb,
                word_embeddings: words,
                empty_documents: Vec::new(),
                dropped: Vec::new(),
            };
            let cfg = RunConfig { top_j, extraction, ..RunConfig::default() };
            let topics = pipeline::extract(&inputs, &clusters, &proj, &cfg)?;
            write_file(&out, topics.to_json() + "\n")?;
            print!("{}", topics.to_table());
            Ok(())
        }
        Command::Coherence { corpus: path, topics, coherence_n, aggregation, top_fraction, out } => {
            let corpus = load_preprocessed(&path, &Stopwords::english())?;
            let topics = TopicSet::from_json(&fs::read_to_string(&topics)?)?;
            let cfg = RunConfig {
                coherence_n,
                aggregation: aggregation.into(),
                ..RunConfig::default()
            };
            let reference = ReferenceStats::new(&corpus)?;
            let mut report = eval::coherence_report(&topics, &reference, &cfg.coherence_config())?;
            if let Some(f) = top_fraction {
                report = eval::top_fraction_filter(&report, f)?;
            }
            if let Some(out) = out {
                write_json(&out, &report)?;
            }
            print_json(&report)
        }
        Command::Report { dir } => report(&dir),
        Command::Run(args) => {
            if args.seed.is_none() {
                bail!(PipelineError::Config("--seed is required for run".into()));
            }
            let cfg = args.into_config()?;
            let bundle = pipeline::run_pipeline(&cfg)?;
            print_json(&bundle.aggregate)
        }
        Command::Oracle(args) => {
            let cfg = args.into_config()?;
            let inputs = Inputs::load(&cfg)?;
            let out = pipeline::perfect_label_oracle(&inputs, &cfg)?;
            print_json(&json!({ "topics": out.topics.topics.len(), "coherence": out.report }))
        }
        Command::Synth { classes, docs_per_class, dim, separation, seed, out_dir } => {
            let f = synthetic::planted(&PlantedConfig {
                classes,
                docs_per_class,
                dim,
                separation,
                seed,
                ..PlantedConfig::default()
            });
            fs::create_dir_all(&out_dir)?;
            let mut buf = Vec::new();
            corpus::write_corpus(&f.corpus, &mut buf)?;
            write_file(&out_dir.join("corpus.jsonl"), buf)?;
            f.embeddings.write_to(out_dir.join("embeddings.emb"))?;
            f.word_embeddings.write_to(out_dir.join("words.emb"))?;
            print_json(&json!({ "documents": f.corpus.len(), "class_vocab": f.class_vocab }))
        }
    }
}

/// Recomputes the aggregate from `run_<k>/accuracy.json` and compares it
/// with the stored `aggregate.json`.
fn report(dir: &Path) -> Result<()> {
    let stored: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.join("aggregate.json")).context("reading aggregate.json")?,
    )?;
    let runs = stored["runs"].as_u64().context("aggregate.json lacks a run count")? as usize;
    let mut coherence = Vec::new();
    let mut top = Vec::new();
    let mut accuracy = Vec::new();
    let mut topics = Vec::new();
    for k in 0..runs {
        let path = dir.join(format!("run_{k}")).join("accuracy.json");
        let m: serde_json::Value = serde_json::from_str(
            &fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
        )?;
        coherence.push(m["coherence"].as_f64().context("missing coherence")?);
        top.push(m["coherence_top"].as_f64().context("missing coherence_top")?);
        topics.push(m["extracted_topics"].as_f64().context("missing extracted_topics")?);
        if let Some(a) = m["accuracy"].as_f64() {
            accuracy.push(a);
        }
    }
    let row = |name: &str, v: &[f64]| match pipeline::Summary::of(v) {
        Some(s) => println!("{name:<16} {:>9.4} {:>9.4} {:>9.4}", s.mean, s.max, s.std),
        None => println!("{name:<16} {:>9} {:>9} {:>9}", "-", "-", "-"),
    };
    println!("{:<16} {:>9} {:>9} {:>9}", "metric", "average", "max", "std");
    row("coherence", &coherence);
    row("coherence_top", &top);
    row("accuracy", &accuracy);
    row("topics", &topics);
    let recomputed = pipeline::Summary::of(&coherence).context("no runs")?;
    let stored_mean = stored["coherence"]["mean"].as_f64().context("missing stored mean")?;
    if (recomputed.mean - stored_mean).abs() > 1e-12 {
        bail!("aggregate.json disagrees with per-run files ({stored_mean} vs {})", recomputed.mean);
    }
    Ok(())
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return e.kind();
        }
        if cause.is::<CorpusError>() {
            return "corpus";
        }
        if cause.is::<EmbeddingError>() {
            return "embedding";
        }
        if cause.is::<FewShotError>() {
            return "fewshot";
        }
        if cause.is::<TopicError>() {
            return "topics";
        }
        if cause.is::<EvalError>() {
            return "eval";
        }
        if cause.is::<serde_json::Error>() {
            return "json";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "cli"
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = json!({ "error": { "kind": error_kind(&err), "message": format!("{err:#}") } });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
