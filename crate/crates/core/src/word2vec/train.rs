use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::thread;

use log::debug;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sampling::{training_pairs, NegativeSampler};
use super::{build_vocab, KeyedVectors, Vocabulary, W2VConfig};
use crate::error::{Error, Result};
use crate::preprocess::TokenizedReview;

/// Input-side (published) and output-side (context) vectors, row-major `V × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vocab_size: usize,
    pub dim: usize,
    pub input: Vec<f32>,
    pub output: Vec<f32>,
}

impl EmbeddingMatrix {
    /// Input vectors uniform in `[-0.5/dim, 0.5/dim]`, output vectors zero.
    pub fn initialize(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 0.5 / dim as f32;
        let input = (0..vocab_size * dim)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self {
            vocab_size,
            dim,
            input,
            output: vec![0.0; vocab_size * dim],
        }
    }

    pub fn input_row(&self, i: usize) -> &[f32] {
        &self.input[i * self.dim..(i + 1) * self.dim]
    }

    pub fn output_row(&self, i: usize) -> &[f32] {
        &self.output[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.input.iter().chain(&self.output).all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct SkipGramModel {
    pub vocab: Vocabulary,
    pub matrix: EmbeddingMatrix,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl SkipGramModel {
    pub fn keyed_vectors(&self) -> KeyedVectors {
        KeyedVectors::new(
            self.vocab.tokens().to_vec(),
            self.matrix.dim,
            self.matrix.input.clone(),
        )
        .expect("vocabulary and matrix shapes agree")
    }
}

fn log_sigmoid_neg<F: Float>(x: F) -> F {
    // -log σ(x) = softplus(-x)
    let z = -x;
    z.max(F::zero()) + (F::one() + (-z.abs()).exp()).ln()
}

fn sigmoid<F: Float>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Negative-sampling loss for one center vector against `targets`, where
/// `targets[0]` is the observed context and the rest are noise words:
///
/// `loss = -log σ(u₀·v) - Σⱼ log σ(-uⱼ·v)`
///
/// Gradients with respect to `v` and each `uⱼ` are written to the output
/// buffers; the loss is returned.
pub fn sgns_example<F: Float>(
    center: &[F],
    targets: &[Vec<F>],
    grad_center: &mut [F],
    grad_targets: &mut [Vec<F>],
) -> F {
    grad_center.iter_mut().for_each(|g| *g = F::zero());
    let mut loss = F::zero();
    for (j, (u, gu)) in targets.iter().zip(grad_targets.iter_mut()).enumerate() {
        let score = u
            .iter()
            .zip(center)
            .fold(F::zero(), |acc, (&a, &b)| acc + a * b);
        let (label, term) = if j == 0 {
            (F::one(), log_sigmoid_neg(score))
        } else {
            (F::zero(), log_sigmoid_neg(-score))
        };
        loss = loss + term;
        let g = sigmoid(score) - label;
        for ((gc, &ui), (gui, &vi)) in grad_center.iter_mut().zip(u).zip(gu.iter_mut().zip(center))
        {
            *gc = *gc + g * ui;
            *gui = g * vi;
        }
    }
    loss
}

/// Lock-free parameter storage shared between worker threads. Updates are
/// plain load/modify/store sequences and may race; single-worker runs are
/// fully deterministic.
struct SharedParams {
    dim: usize,
    input: Vec<AtomicU32>,
    output: Vec<AtomicU32>,
}

impl SharedParams {
    fn new(m: &EmbeddingMatrix) -> Self {
        let wrap = |v: &[f32]| v.iter().map(|x| AtomicU32::new(x.to_bits())).collect();
        Self {
            dim: m.dim,
            input: wrap(&m.input),
            output: wrap(&m.output),
        }
    }

    fn load(cells: &[AtomicU32], row: usize, dim: usize, out: &mut [f32]) {
        for (o, c) in out.iter_mut().zip(&cells[row * dim..(row + 1) * dim]) {
            *o = f32::from_bits(c.load(Ordering::Relaxed));
        }
    }

    fn axpy(cells: &[AtomicU32], row: usize, dim: usize, alpha: f32, delta: &[f32]) {
        for (c, &d) in cells[row * dim..(row + 1) * dim].iter().zip(delta) {
            let v = f32::from_bits(c.load(Ordering::Relaxed)) + alpha * d;
            c.store(v.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_matrix(self, vocab_size: usize) -> EmbeddingMatrix {
        let unwrap = |v: Vec<AtomicU32>| {
            v.into_iter()
                .map(|c| f32::from_bits(c.into_inner()))
                .collect()
        };
        EmbeddingMatrix {
            vocab_size,
            dim: self.dim,
            input: unwrap(self.input),
            output: unwrap(self.output),
        }
    }
}

struct Workspace {
    center: Vec<f32>,
    targets: Vec<Vec<f32>>,
    grad_center: Vec<f32>,
    grad_targets: Vec<Vec<f32>>,
    rows: Vec<usize>,
    negatives: Vec<usize>,
}

impl Workspace {
    fn new(dim: usize, negatives: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            targets: vec![vec![0.0; dim]; negatives + 1],
            grad_center: vec![0.0; dim],
            grad_targets: vec![vec![0.0; dim]; negatives + 1],
            rows: Vec::with_capacity(negatives + 1),
            negatives: Vec::with_capacity(negatives),
        }
    }
}

fn sgd_pair(params: &SharedParams, center: usize, ws: &mut Workspace, lr: f32) -> f64 {
    let dim = params.dim;
    let k = ws.rows.len();
    SharedParams::load(&params.input, center, dim, &mut ws.center);
    for (j, &row) in ws.rows.iter().enumerate() {
        SharedParams::load(&params.output, row, dim, &mut ws.targets[j]);
    }
    let loss = sgns_example(
        &ws.center,
        &ws.targets[..k],
        &mut ws.grad_center,
        &mut ws.grad_targets[..k],
    );
    for (j, &row) in ws.rows.iter().enumerate() {
        SharedParams::axpy(&params.output, row, dim, -lr, &ws.grad_targets[j]);
    }
    SharedParams::axpy(&params.input, center, dim, -lr, &ws.grad_center);
    loss as f64
}

fn worker_seed(seed: u64, epoch: usize, worker: usize) -> u64 {
    seed ^ (epoch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (worker as u64 + 1).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
}

pub fn train_skipgram(corpus: &[TokenizedReview], config: &W2VConfig) -> Result<SkipGramModel> {
    config.validate()?;
    let vocab = build_vocab(corpus, config.min_count);
    train_skipgram_with_vocab(corpus, vocab, config)
}

pub fn train_skipgram_with_vocab(
    corpus: &[TokenizedReview],
    vocab: Vocabulary,
    config: &W2VConfig,
) -> Result<SkipGramModel> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::Config(
            "cannot train embeddings on an empty vocabulary".into(),
        ));
    }
    let v = vocab.len();
    let dim = config.dim;
    let init = EmbeddingMatrix::initialize(v, dim, config.seed);
    let sentences: Vec<Vec<usize>> = corpus.iter().map(|r| vocab.encode(&r.tokens)).collect();
    let sampler = if v >= 2 {
        Some(NegativeSampler::new(vocab.counts())?)
    } else {
        None
    };
    let negatives = if sampler.is_some() {
        config.negatives
    } else {
        0
    };

    let params = SharedParams::new(&init);
    let total_words: u64 = sentences.iter().map(|s| s.len() as u64).sum::<u64>().max(1);
    let planned = total_words * config.epochs as u64;
    let words_done = AtomicU64::new(0);
    let lr0 = config.learning_rate as f32;
    let mode = config.window_mode();
    let workers = config.workers.min(sentences.len().max(1));
    let chunk = sentences.len().div_ceil(workers).max(1);

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let results: Vec<(f64, u64)> = thread::scope(|scope| {
            let handles: Vec<_> = sentences
                .chunks(chunk)
                .enumerate()
                .map(|(w, part)| {
                    let (params, sampler, words_done) = (&params, &sampler, &words_done);
                    scope.spawn(move || {
                        let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(config.seed, epoch, w));
                        let mut ws = Workspace::new(dim, negatives);
                        let (mut loss, mut pairs) = (0f64, 0u64);
                        for sentence in part {
                            let progress =
                                words_done.load(Ordering::Relaxed) as f32 / planned as f32;
                            let lr = lr0 * (1.0 - 0.9 * progress.min(1.0));
                            for (center, context) in
                                training_pairs(sentence, config.window, mode, &mut rng)
                            {
                                ws.rows.clear();
                                ws.rows.push(context);
                                if let Some(s) = sampler {
                                    s.sample_into(&mut rng, negatives, context, &mut ws.negatives);
                                    ws.rows.extend_from_slice(&ws.negatives);
                                }
                                loss += sgd_pair(params, center, &mut ws, lr);
                                pairs += 1;
                            }
                            words_done.fetch_add(sentence.len() as u64, Ordering::Relaxed);
                        }
                        (loss, pairs)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        });
        let (loss, pairs) = results
            .into_iter()
            .fold((0f64, 0u64), |(l, p), (l2, p2)| (l + l2, p + p2));
        let mean = if pairs == 0 { 0.0 } else { loss / pairs as f64 };
        let finite = params
            .input
            .iter()
            .chain(&params.output)
            .all(|c| f32::from_bits(c.load(Ordering::Relaxed)).is_finite());
        if !finite || !mean.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite embedding values after epoch {}",
                epoch + 1
            )));
        }
        debug!(
            "w2v epoch {}/{}: mean pair loss {:.5} over {} pairs",
            epoch + 1,
            config.epochs,
            mean,
            pairs
        );
        epoch_losses.push(mean);
    }

    Ok(SkipGramModel {
        vocab,
        matrix: params.into_matrix(v),
        epoch_losses,
    })
}
