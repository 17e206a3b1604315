use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bce_loss, AdamState, Mode, SiameseModel, SiameseParams, DECISION_THRESHOLD};
use crate::error::{Error, Result};

/// Labeled model inputs. Label 1 is computer-generated.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn label(&self, i: usize) -> u8;

    /// `(context sequence, token sequence)`, each `T × D`.
    fn inputs(&self, i: usize) -> Result<(Array2<f64>, Array2<f64>)>;
}

/// Samples held fully in memory.
#[derive(Debug, Clone, Default)]
pub struct DenseSamples {
    pub context: Vec<Array2<f64>>,
    pub tokens: Vec<Array2<f64>>,
    pub labels: Vec<u8>,
}

impl DenseSamples {
    pub fn push(&mut self, context: Array2<f64>, tokens: Array2<f64>, label: u8) {
        self.context.push(context);
        self.tokens.push(tokens);
        self.labels.push(label);
    }
}

impl SampleSource for DenseSamples {
    fn len(&self) -> usize {
        self.labels.len()
    }

    fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    fn inputs(&self, i: usize) -> Result<(Array2<f64>, Array2<f64>)> {
        Ok((self.context[i].clone(), self.tokens[i].clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 100,
            patience: 20,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("model.learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("model.batch_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

/// Binary metrics with computer-generated as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub count: u64,
    /// Mean binary cross-entropy; absent for hard decisions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl Metrics {
    /// Metrics from hard predictions (1 = computer-generated).
    pub fn from_predictions(predicted: &[u8], labels: &[u8]) -> Result<Self> {
        if predicted.is_empty() {
            return Err(Error::Argument("cannot evaluate an empty set".into()));
        }
        if predicted.len() != labels.len() {
            return Err(Error::Dimension {
                expected: labels.len(),
                found: predicted.len(),
            });
        }
        let mut c = Confusion {
            tp: 0,
            fp: 0,
            fn_: 0,
            tn: 0,
        };
        for (&p, &y) in predicted.iter().zip(labels) {
            match (p == 1, y == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let n = predicted.len() as u64;
        let precision = ratio(c.tp, c.tp + c.fp);
        let recall = ratio(c.tp, c.tp + c.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Ok(Self {
            count: n,
            loss: None,
            accuracy: ratio(c.tp + c.tn, n),
            precision,
            recall,
            f1,
            confusion: c,
        })
    }
}

/// Metrics of scores thresholded at 0.5 (score ≥ 0.5 predicts class 1).
pub fn evaluate_scores(scores: &[f64], labels: &[u8]) -> Result<Metrics> {
    let predicted: Vec<u8> = scores
        .iter()
        .map(|&s| u8::from(s >= DECISION_THRESHOLD))
        .collect();
    let mut m = Metrics::from_predictions(&predicted, labels)?;
    m.loss = Some(
        scores
            .iter()
            .zip(labels)
            .map(|(&s, &y)| bce_loss(s, y))
            .sum::<f64>()
            / scores.len() as f64,
    );
    Ok(m)
}

/// Inference-mode scores for every sample, in order.
pub fn predict_all<S: SampleSource + ?Sized>(
    model: &SiameseModel,
    samples: &S,
) -> Result<Vec<f64>> {
    (0..samples.len())
        .into_par_iter()
        .map(|i| {
            let (ctx, seq) = samples.inputs(i)?;
            model.predict(ctx.view(), seq.view())
        })
        .collect()
}

pub fn evaluate<S: SampleSource + ?Sized>(model: &SiameseModel, samples: &S) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::Argument("cannot evaluate an empty set".into()));
    }
    let scores = predict_all(model, samples)?;
    let labels: Vec<u8> = (0..samples.len()).map(|i| samples.label(i)).collect();
    evaluate_scores(&scores, &labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub train_count: usize,
    pub validation_count: usize,
    /// Validation metrics of the returned model.
    pub best_validation: Option<Metrics>,
}

const CHUNK: usize = 4;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn dropout_seed(seed: u64, epoch: usize, sample: usize) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ epoch as u64) ^ sample as u64)
}

struct BatchOutcome {
    grads: SiameseParams,
    loss: f64,
    correct: usize,
}

fn batch_gradients<S: SampleSource + ?Sized>(
    model: &SiameseModel,
    samples: &S,
    batch: &[usize],
    seed: u64,
    epoch: usize,
) -> Result<BatchOutcome> {
    let parts: Vec<BatchOutcome> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut out = BatchOutcome {
                grads: model.params.zeros_like(),
                loss: 0.0,
                correct: 0,
            };
            for &i in chunk {
                let (ctx, seq) = samples.inputs(i)?;
                let label = samples.label(i);
                let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed(seed, epoch, i));
                let cache = model.forward(ctx.view(), seq.view(), Mode::Train(&mut rng))?;
                out.loss += bce_loss(cache.score, label);
                out.correct += usize::from(u8::from(cache.score >= DECISION_THRESHOLD) == label);
                out.grads.add_assign(&model.backward(&cache, label));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut parts = parts.into_iter();
    let mut total = parts.next().expect("non-empty batch");
    for p in parts {
        total.grads.add_assign(&p.grads);
        total.loss += p.loss;
        total.correct += p.correct;
    }
    Ok(total)
}

/// Minibatch Adam on binary cross-entropy with early stopping on
/// validation loss. Returns the best epoch's parameters rounded to
/// checkpoint precision, so reloading a saved model reproduces
/// `best_validation` exactly. `progress` sees each finished epoch.
pub fn train<T, V, F>(
    model: &SiameseModel,
    train_set: &T,
    validation: &V,
    config: &TrainConfig,
    mut progress: F,
) -> Result<(SiameseModel, TrainReport)>
where
    T: SampleSource + ?Sized,
    V: SampleSource + ?Sized,
    F: FnMut(&EpochRecord),
{
    config.validate()?;
    model.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let mut current = model.clone();
    let mut best = model.params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut wait = 0;
    let mut adam = AdamState::new(&current.params, config.learning_rate);
    let mut epochs = Vec::new();
    let n = train_set.len();
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 1..=config.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(
            config.seed.wrapping_add(epoch as u64),
        ));
        let mut loss_sum = 0.0;
        let mut correct = 0;
        for batch in order.chunks(config.batch_size) {
            let mut out = batch_gradients(&current, train_set, batch, config.seed, epoch)?;
            out.grads.scale(1.0 / batch.len() as f64);
            adam.update(&mut current.params, &out.grads);
            loss_sum += out.loss;
            correct += out.correct;
        }
        let train_loss = loss_sum / n as f64;
        if !train_loss.is_finite() || !current.params.is_finite() {
            return Err(Error::Numeric(format!(
                "training diverged at epoch {epoch}"
            )));
        }
        let val = if validation.is_empty() {
            None
        } else {
            Some(evaluate(&current, validation)?)
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc: correct as f64 / n as f64,
            val_loss: val.as_ref().and_then(|m| m.loss),
            val_acc: val.as_ref().map(|m| m.accuracy),
        };
        progress(&record);
        let monitored = record.val_loss.unwrap_or(train_loss);
        epochs.push(record);
        if monitored < best_loss {
            best_loss = monitored;
            best_epoch = epoch;
            best.clone_from(&current.params);
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience.max(1) {
                break;
            }
        }
    }
    let stopped_epoch = epochs.len();
    current.params = best;
    current.params.quantize_f32();
    let best_validation = if validation.is_empty() {
        None
    } else {
        Some(evaluate(&current, validation)?)
    };
    let report = TrainReport {
        epochs,
        best_epoch,
        stopped_epoch,
        patience: config.patience,
        max_epochs: config.max_epochs,
        train_count: n,
        validation_count: validation.len(),
        best_validation,
    };
    Ok((current, report))
}
