//! Pipeline configuration: a TOML file, then command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use reviewjudge::fuzzy::FuzzyConfig;
use reviewjudge::siamese::{ModelConfig, TrainConfig};
use reviewjudge::word2vec::W2VConfig;
use serde::Deserialize;

use crate::UsageError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContextSection {
    /// CTX1 store; the skip-gram fallback is used when absent.
    pub store: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub hidden: usize,
    pub head_hidden: Vec<usize>,
    pub dropout: f64,
    pub shared_weights: bool,
    pub max_seq_len: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        Self {
            hidden: m.hidden,
            head_hidden: m.head_hidden,
            dropout: m.dropout,
            shared_weights: m.shared_weights,
            max_seq_len: m.max_seq_len,
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            validation_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzySection {
    /// JSON membership file; the symmetric default trapezoids otherwise.
    pub config: Option<PathBuf>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    dataset_path: Option<PathBuf>,
    stopwords_path: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    skip_invalid: bool,
    w2v: W2VConfig,
    context: ContextSection,
    model: ModelSection,
    fuzzy: FuzzySection,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub dataset_path: Option<PathBuf>,
    pub stopwords_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub skip_invalid: bool,
    pub w2v: W2VConfig,
    pub context: ContextSection,
    pub model: ModelSection,
    pub fuzzy: FuzzySection,
}

/// Values given on the command line; each wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub fixed_window: bool,
    pub shared_weights: bool,
}

fn parse_file(path: &Path) -> Result<FileConfig, UsageError> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        UsageError(format!(
            "invalid config {}: {}",
            path.display(),
            e.message()
        ))
    })
}

impl PipelineConfig {
    pub fn resolve(file: Option<&Path>, o: &Overrides) -> Result<Self, UsageError> {
        let f = match file {
            Some(p) => parse_file(p)?,
            None => FileConfig::default(),
        };
        let dataset_path = o.dataset.clone().or(f.dataset_path);
        let seed = o.seed.or(f.seed).unwrap_or(DEFAULT_SEED);
        let mut w2v = f.w2v;
        w2v.seed = seed;
        if let Some(n) = o.workers {
            w2v.workers = n;
        }
        if o.fixed_window {
            w2v.fixed_window = true;
        }
        let mut model = f.model;
        if o.shared_weights {
            model.shared_weights = true;
        }
        let cfg = Self {
            dataset_path,
            stopwords_path: f.stopwords_path,
            output_dir: o
                .output_dir
                .clone()
                .or(f.output_dir)
                .unwrap_or_else(|| PathBuf::from("reviewjudge-out")),
            seed,
            skip_invalid: f.skip_invalid,
            w2v,
            context: f.context,
            model,
            fuzzy: f.fuzzy,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), UsageError> {
        let usage = |e: reviewjudge::Error| UsageError(e.to_string());
        self.w2v.validate().map_err(usage)?;
        self.model_config(self.w2v.dim).validate().map_err(usage)?;
        self.train_config().validate().map_err(usage)?;
        let frac = self.model.validation_fraction;
        if !(frac > 0.0 && frac < 1.0) {
            return Err(UsageError(format!(
                "model.validation_fraction must lie in (0, 1), got {frac}"
            )));
        }
        for (what, p) in [
            ("stopwords file", &self.stopwords_path),
            ("context store", &self.context.store),
            ("fuzzy config", &self.fuzzy.config),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(UsageError(format!("{what} not found: {}", p.display())));
                }
            }
        }
        Ok(())
    }

    /// The dataset path, checked to exist.
    pub fn dataset(&self) -> Result<&Path, UsageError> {
        let p = self.dataset_path.as_deref().ok_or_else(|| {
            UsageError("dataset not found: set dataset_path in the config or pass --dataset".into())
        })?;
        if p.is_file() {
            Ok(p)
        } else {
            Err(UsageError(format!("dataset not found: {}", p.display())))
        }
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden: self.model.hidden,
            head_hidden: self.model.head_hidden.clone(),
            dropout: self.model.dropout,
            shared_weights: self.model.shared_weights,
            max_seq_len: self.model.max_seq_len,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.model.learning_rate,
            batch_size: self.model.batch_size,
            max_epochs: self.model.max_epochs,
            patience: self.model.patience,
            seed: self.seed,
        }
    }

    pub fn fuzzy_config(&self) -> Result<FuzzyConfig, UsageError> {
        let mut cfg = match &self.fuzzy.config {
            Some(p) => FuzzyConfig::load(p)
                .map_err(|e| UsageError(format!("fuzzy config {}: {e}", p.display())))?,
            None => FuzzyConfig::default(),
        };
        if let Some(t) = self.fuzzy.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(UsageError(format!(
                    "fuzzy.threshold must lie in [0, 1], got {t}"
                )));
            }
            cfg.threshold = t;
        }
        Ok(cfg)
    }

    pub fn vectors_path(&self) -> PathBuf {
        self.output_dir.join("word_vectors.w2v")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("model.siam")
    }
}
