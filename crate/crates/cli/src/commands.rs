use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::{info, warn};
use reviewjudge::context::{corpus_digest_of_file, load_store, ContextProvider, EmbeddingStore};
use reviewjudge::corpus::{
    corpus_stats, load_reviews, split_train_validation, Label, LengthUnit, LoadOptions, Review,
};
use reviewjudge::pipeline::{classify_text, evaluate_feature_set, EvaluationReport, FeatureSet};
use reviewjudge::preprocess::{
    frequency_table, preprocess_corpus, FrequencyStage, StopwordList, TokenizedReview,
};
use reviewjudge::siamese::{load_model, save_model, train, SiameseModel};
use reviewjudge::word2vec::{read_w2v, train_skipgram, write_text, write_w2v, KeyedVectors};
use serde::Serialize;

use crate::config::{Overrides, PipelineConfig};
use crate::{Cli, Command, SplitChoice, UsageError};

pub fn run(cli: Cli) -> Result<()> {
    let (fixed_window, shared_weights) = match &cli.command {
        Command::TrainW2v { fixed_window, .. } => (*fixed_window, false),
        Command::Train {
            fixed_window,
            shared_weights,
            ..
        } => (*fixed_window, *shared_weights),
        _ => (false, false),
    };
    let overrides = Overrides {
        dataset: cli.dataset.clone(),
        output_dir: cli.output_dir.clone(),
        seed: cli.seed,
        workers: cli.workers,
        fixed_window,
        shared_weights,
    };
    let cfg = PipelineConfig::resolve(cli.config.as_deref(), &overrides)?;
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(UsageError("--workers must be at least 1".into()).into());
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match cli.command {
        Command::Stats { length_unit } => cmd_stats(&cfg, length_unit, cli.json_only),
        Command::Preprocess { stage, top } => cmd_preprocess(&cfg, stage, top),
        Command::TrainW2v { text, .. } => cmd_train_w2v(&cfg, text.as_deref()),
        Command::Train { reuse_vectors, .. } => cmd_train(&cfg, reuse_vectors),
        Command::Evaluate { checkpoint, split } => cmd_evaluate(&cfg, checkpoint, split),
        Command::Classify { checkpoint, text } => cmd_classify(&cfg, checkpoint, &text),
    }
}

fn load_corpus(cfg: &PipelineConfig) -> Result<Vec<Review>> {
    let path = cfg.dataset()?;
    let loaded = load_reviews(
        path,
        LoadOptions {
            skip_invalid: cfg.skip_invalid,
        },
    )
    .context("load stage")?;
    for w in &loaded.warnings {
        warn!("skipped {w}");
    }
    info!(
        "loaded {} reviews from {}",
        loaded.reviews.len(),
        path.display()
    );
    Ok(loaded.reviews)
}

fn stopwords(cfg: &PipelineConfig) -> Result<StopwordList> {
    Ok(match &cfg.stopwords_path {
        Some(p) => StopwordList::from_file(p).context("preprocess stage: stopwords")?,
        None => StopwordList::builtin(),
    })
}

fn output_dir(cfg: &PipelineConfig) -> Result<&Path> {
    fs::create_dir_all(&cfg.output_dir).with_context(|| {
        format!(
            "cannot create output directory {}",
            cfg.output_dir.display()
        )
    })?;
    Ok(&cfg.output_dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn cmd_stats(cfg: &PipelineConfig, unit: LengthUnit, json_only: bool) -> Result<()> {
    let reviews = load_corpus(cfg)?;
    let stats = corpus_stats(&reviews, unit);
    let out = output_dir(cfg)?.join("stats.json");
    write_json(&out, &stats)?;
    if json_only {
        println!("{}", serde_json::to_string(&stats)?);
    } else {
        print!("{}", stats.render_table());
    }
    info!("wrote {}", out.display());
    Ok(())
}

fn cmd_preprocess(cfg: &PipelineConfig, stage: FrequencyStage, top: usize) -> Result<()> {
    let reviews = load_corpus(cfg)?;
    let list = stopwords(cfg)?;
    let cleaned = preprocess_corpus(&reviews, &list);
    let dir = output_dir(cfg)?;
    let path = dir.join("cleaned.jsonl");
    let mut w = BufWriter::new(
        File::create(&path).with_context(|| format!("cannot write {}", path.display()))?,
    );
    for r in &cleaned {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let table = frequency_table(&reviews, stage, &list);
    let entries = if top == 0 {
        &table.entries[..]
    } else {
        table.top(top)
    };
    let name = match stage {
        FrequencyStage::Raw => "frequency_raw.json",
        FrequencyStage::Cleaned => "frequency_cleaned.json",
    };
    write_json(&dir.join(name), &entries)?;
    println!("{}", serde_json::to_string(&entries)?);
    info!("wrote {} and {}", path.display(), dir.join(name).display());
    Ok(())
}

fn train_vectors(cfg: &PipelineConfig, cleaned: &[TokenizedReview]) -> Result<KeyedVectors> {
    info!(
        "training word2vec: dim {} window {} epochs {} workers {}",
        cfg.w2v.dim, cfg.w2v.window, cfg.w2v.epochs, cfg.w2v.workers
    );
    let model = train_skipgram(cleaned, &cfg.w2v).context("word2vec stage")?;
    for (i, loss) in model.epoch_losses.iter().enumerate() {
        info!(
            "word2vec epoch {}/{} mean loss {loss:.5}",
            i + 1,
            cfg.w2v.epochs
        );
    }
    Ok(model.keyed_vectors())
}

fn save_vectors(vectors: &KeyedVectors, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    write_w2v(BufWriter::new(f), vectors)?;
    Ok(())
}

fn load_vectors(path: &Path) -> Result<KeyedVectors> {
    if !path.is_file() {
        return Err(UsageError(format!(
            "word vectors not found: {} (run train first)",
            path.display()
        ))
        .into());
    }
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_w2v(std::io::BufReader::new(f)).with_context(|| format!("cannot load {}", path.display()))
}

#[derive(Serialize)]
struct W2vSummary {
    vocabulary: usize,
    dim: usize,
    epoch_losses: Vec<f64>,
    path: PathBuf,
}

fn cmd_train_w2v(cfg: &PipelineConfig, text: Option<&Path>) -> Result<()> {
    let reviews = load_corpus(cfg)?;
    let list = stopwords(cfg)?;
    let cleaned = preprocess_corpus(&reviews, &list);
    let model = train_skipgram(&cleaned, &cfg.w2v).context("word2vec stage")?;
    let vectors = model.keyed_vectors();
    let path = cfg.vectors_path();
    output_dir(cfg)?;
    save_vectors(&vectors, &path)?;
    if let Some(t) = text {
        let f = File::create(t).with_context(|| format!("cannot write {}", t.display()))?;
        write_text(BufWriter::new(f), &vectors)?;
    }
    let summary = W2vSummary {
        vocabulary: vectors.len(),
        dim: vectors.dim(),
        epoch_losses: model.epoch_losses.clone(),
        path,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn load_context_store(cfg: &PipelineConfig, dim: usize) -> Result<Option<EmbeddingStore>> {
    let Some(path) = &cfg.context.store else {
        return Ok(None);
    };
    let store = load_store(path, dim).context("context stage")?;
    let digest = corpus_digest_of_file(cfg.dataset()?).context("context stage")?;
    if !store.check_digest(&digest) {
        warn!(
            "context store {} was built from a different corpus file",
            path.display()
        );
    }
    info!("context store: {} vectors", store.len());
    Ok(Some(store))
}

/// Reviews of one split paired with their cleaned tokens.
fn labeled(
    reviews: &[Review],
    cleaned: &HashMap<u64, &TokenizedReview>,
) -> Vec<(TokenizedReview, Label)> {
    reviews
        .iter()
        .map(|r| ((*cleaned[&r.id]).clone(), r.label))
        .collect()
}

struct Prepared {
    reviews: Vec<Review>,
    cleaned: Vec<TokenizedReview>,
}

fn prepare(cfg: &PipelineConfig) -> Result<Prepared> {
    let reviews = load_corpus(cfg)?;
    let list = stopwords(cfg)?;
    let cleaned = preprocess_corpus(&reviews, &list);
    Ok(Prepared { reviews, cleaned })
}

type Labelled = Vec<(TokenizedReview, Label)>;

fn split_sets(cfg: &PipelineConfig, p: &Prepared) -> Result<(Labelled, Labelled)> {
    let split = split_train_validation(&p.reviews, cfg.model.validation_fraction, cfg.seed)
        .context("split stage")?;
    let by_id: HashMap<u64, &TokenizedReview> =
        p.cleaned.iter().map(|t| (t.review_id, t)).collect();
    Ok((
        labeled(&split.train, &by_id),
        labeled(&split.validation, &by_id),
    ))
}

fn cmd_train(cfg: &PipelineConfig, reuse_vectors: bool) -> Result<()> {
    let prepared = prepare(cfg)?;
    let dir = output_dir(cfg)?.to_path_buf();
    let vectors_path = cfg.vectors_path();
    let vectors = if reuse_vectors {
        load_vectors(&vectors_path)?
    } else {
        let v = train_vectors(cfg, &prepared.cleaned)?;
        save_vectors(&v, &vectors_path)?;
        v
    };
    let store = load_context_store(cfg, vectors.dim())?;
    let provider = match &store {
        Some(s) => ContextProvider::Store(s),
        None => ContextProvider::Fallback(&vectors),
    };
    let (train_rows, val_rows) = split_sets(cfg, &prepared)?;
    let max_len = cfg.model.max_seq_len;
    let train_set =
        FeatureSet::build(&train_rows, &vectors, &provider, max_len).context("feature stage")?;
    let val_set =
        FeatureSet::build(&val_rows, &vectors, &provider, max_len).context("feature stage")?;
    info!(
        "siamese training: {} train / {} validation, provider {}",
        train_rows.len(),
        val_rows.len(),
        provider.kind()
    );
    let model = SiameseModel::new(cfg.model_config(vectors.dim())).context("siamese stage")?;
    let max_epochs = cfg.model.max_epochs;
    let (best, report) = train(&model, &train_set, &val_set, &cfg.train_config(), |e| {
        let val = match (e.val_loss, e.val_acc) {
            (Some(l), Some(a)) => format!(" val_loss {l:.4} val_acc {a:.4}"),
            _ => String::new(),
        };
        info!(
            "epoch {}/{} train_loss {:.4} train_acc {:.4}{val}",
            e.epoch, max_epochs, e.train_loss, e.train_acc
        );
    })
    .context("siamese stage")?;
    save_model(&best, cfg.checkpoint_path()).context("siamese stage: checkpoint")?;
    write_json(&dir.join("train_report.json"), &report)?;
    info!(
        "best epoch {} of {}; wrote {}",
        report.best_epoch,
        report.stopped_epoch,
        cfg.checkpoint_path().display()
    );
    println!("{}", serde_json::to_string(&report.best_validation)?);
    Ok(())
}

fn open_checkpoint(cfg: &PipelineConfig, checkpoint: Option<PathBuf>) -> Result<SiameseModel> {
    let path = checkpoint.unwrap_or_else(|| cfg.checkpoint_path());
    if !path.is_file() {
        return Err(UsageError(format!("checkpoint not found: {}", path.display())).into());
    }
    load_model(&path).with_context(|| format!("cannot load checkpoint {}", path.display()))
}

/// Architecture fields of the checkpoint must agree with the configuration.
fn check_architecture(
    cfg: &PipelineConfig,
    model: &SiameseModel,
    input_dim: usize,
) -> Result<(), UsageError> {
    let want = cfg.model_config(input_dim);
    let got = &model.config;
    let mut diffs = Vec::new();
    if got.input_dim != want.input_dim {
        diffs.push(format!("input_dim {} vs {}", got.input_dim, want.input_dim));
    }
    if got.hidden != want.hidden {
        diffs.push(format!("hidden {} vs {}", got.hidden, want.hidden));
    }
    if got.head_hidden != want.head_hidden {
        diffs.push(format!(
            "head_hidden {:?} vs {:?}",
            got.head_hidden, want.head_hidden
        ));
    }
    if got.dropout != want.dropout {
        diffs.push(format!("dropout {} vs {}", got.dropout, want.dropout));
    }
    if got.shared_weights != want.shared_weights {
        diffs.push(format!(
            "shared_weights {} vs {}",
            got.shared_weights, want.shared_weights
        ));
    }
    if got.max_seq_len != want.max_seq_len {
        diffs.push(format!(
            "max_seq_len {} vs {}",
            got.max_seq_len, want.max_seq_len
        ));
    }
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(UsageError(format!(
            "checkpoint does not match the model configuration (checkpoint vs config): {}",
            diffs.join(", ")
        )))
    }
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    checkpoint: PathBuf,
    provider: &'a str,
    #[serde(flatten)]
    report: EvaluationReport,
}

fn cmd_evaluate(
    cfg: &PipelineConfig,
    checkpoint: Option<PathBuf>,
    split: SplitChoice,
) -> Result<()> {
    let checkpoint_path = checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
    let model = open_checkpoint(cfg, checkpoint)?;
    let vectors = load_vectors(&cfg.vectors_path())?;
    check_architecture(cfg, &model, vectors.dim())?;
    let fuzzy = cfg.fuzzy_config()?;
    let prepared = prepare(cfg)?;
    let store = load_context_store(cfg, vectors.dim())?;
    let provider = match &store {
        Some(s) => ContextProvider::Store(s),
        None => ContextProvider::Fallback(&vectors),
    };
    let (train_rows, val_rows) = split_sets(cfg, &prepared)?;
    let (rows, name) = match split {
        SplitChoice::Train => (train_rows, "train"),
        SplitChoice::Validation => (val_rows, "validation"),
        SplitChoice::All => {
            let mut all = train_rows;
            all.extend(val_rows);
            all.sort_by_key(|(t, _)| t.review_id);
            (all, "all")
        }
    };
    let set = FeatureSet::build(&rows, &vectors, &provider, model.config.max_seq_len)
        .context("feature stage")?;
    let report = evaluate_feature_set(&model, &set, &fuzzy, name).context("evaluate stage")?;
    let out = MetricsFile {
        checkpoint: checkpoint_path,
        provider: provider.kind(),
        report,
    };
    let path = output_dir(cfg)?.join("metrics.json");
    write_json(&path, &out)?;
    println!("{}", serde_json::to_string(&out)?);
    info!(
        "{name}: sigmoid accuracy {:.4}, fuzzy accuracy {:.4}; wrote {}",
        out.report.sigmoid.accuracy,
        out.report.fuzzy.metrics.accuracy,
        path.display()
    );
    Ok(())
}

fn cmd_classify(cfg: &PipelineConfig, checkpoint: Option<PathBuf>, text: &str) -> Result<()> {
    let model = open_checkpoint(cfg, checkpoint)?;
    let vectors = load_vectors(&cfg.vectors_path())?;
    let fuzzy = cfg.fuzzy_config()?;
    let list = stopwords(cfg)?;
    let result = classify_text(text, &list, &vectors, &model, &fuzzy).context("classify stage")?;
    if result.empty {
        warn!("no known tokens after cleaning; scored through the zero-vector path");
    }
    println!("{}", serde_json::to_string(&result)?);
    Ok(())
}
