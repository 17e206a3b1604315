//! Dual-branch Siamese LSTM scorer.
//!
//! Branch A encodes the contextual review vector (a length-1 sequence),
//! branch B the word-vector token sequence. The two encodings are compared
//! by [`similarity::features`] and a small dense head maps the comparison to
//! a sigmoid score, read as the probability that the review is
//! computer-generated.

mod adam;
mod checkpoint;
pub mod lstm;
pub mod similarity;
mod train;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use adam::AdamState;
pub use checkpoint::{load_model, read_model, save_model, write_model, SIAM_MAGIC, SIAM_VERSION};
pub use lstm::{branch_forward, lstm_step, LstmParams, LstmState};
pub use similarity::{cosine_distance, features, similarity};
pub use train::{
    evaluate, evaluate_scores, predict_all, train, Confusion, DenseSamples, EpochRecord, Metrics,
    SampleSource, TrainConfig, TrainReport,
};

/// Lower clamp for scores inside the loss.
pub const BCE_EPSILON: f64 = 1e-7;
/// Scores at or above this are read as computer-generated.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => lstm::sigmoid(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `out × in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            w: Array2::zeros((outputs, inputs)),
            b: Array1::zeros(outputs),
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn random<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let k = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs, activation);
        layer.w.mapv_inplace(|_| rng.random_range(-k..k));
        layer
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }
}

/// Architecture hyperparameters. Everything needed to rebuild a model's
/// shapes; stored in the checkpoint header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden: usize,
    /// Widths of the relu layers between the features and the sigmoid unit.
    pub head_hidden: Vec<usize>,
    pub dropout: f64,
    pub shared_weights: bool,
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: crate::context::CONTEXT_DIM,
            hidden: 64,
            head_hidden: vec![32],
            dropout: 0.3,
            shared_weights: false,
            max_seq_len: 200,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.input_dim == 0 {
            return bad("model.input_dim must be positive");
        }
        if self.hidden == 0 {
            return bad("model.hidden must be positive");
        }
        if self.head_hidden.contains(&0) {
            return bad("model.head_hidden widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("model.dropout must be in [0, 1)");
        }
        if self.max_seq_len == 0 {
            return bad("model.max_seq_len must be positive");
        }
        Ok(())
    }
}

/// All trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct SiameseParams {
    pub branch_a: LstmParams,
    /// `None` when branch B reuses branch A's weights.
    pub branch_b: Option<LstmParams>,
    pub head: Vec<DenseLayer>,
}

impl SiameseParams {
    pub fn zeros_like(&self) -> Self {
        let zl = |p: &LstmParams| LstmParams::zeros(p.input_dim(), p.hidden());
        Self {
            branch_a: zl(&self.branch_a),
            branch_b: self.branch_b.as_ref().map(zl),
            head: self
                .head
                .iter()
                .map(|l| DenseLayer::zeros(l.inputs(), l.outputs(), l.activation))
                .collect(),
        }
    }

    /// Tensors in checkpoint order: branch A (w, u, b), branch B (w, u, b)
    /// when present, then each head layer (w, b).
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for p in std::iter::once(&self.branch_a).chain(self.branch_b.as_ref()) {
            out.push(p.w.as_slice().expect("standard layout"));
            out.push(p.u.as_slice().expect("standard layout"));
            out.push(p.b.as_slice().expect("standard layout"));
        }
        for l in &self.head {
            out.push(l.w.as_slice().expect("standard layout"));
            out.push(l.b.as_slice().expect("standard layout"));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for p in std::iter::once(&mut self.branch_a).chain(self.branch_b.as_mut()) {
            out.push(p.w.as_slice_mut().expect("standard layout"));
            out.push(p.u.as_slice_mut().expect("standard layout"));
            out.push(p.b.as_slice_mut().expect("standard layout"));
        }
        for l in &mut self.head {
            out.push(l.w.as_slice_mut().expect("standard layout"));
            out.push(l.b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            for x in t {
                *x *= k;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Rounds every parameter through `f32`, the checkpoint precision.
    pub fn quantize_f32(&mut self) {
        for t in self.tensors_mut() {
            for x in t {
                *x = *x as f32 as f64;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiameseModel {
    pub config: ModelConfig,
    pub params: SiameseParams,
}

/// Whether dropout is active.
pub enum Mode<'a> {
    Train(&'a mut dyn rand::RngCore),
    Infer,
}

/// Intermediates kept by [`SiameseModel::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    branch_a: lstm::BranchCache,
    branch_b: lstm::BranchCache,
    pub a: Array1<f64>,
    pub b: Array1<f64>,
    pub features: Array1<f64>,
    /// Input to each head layer (after the previous layer's dropout).
    layer_inputs: Vec<Array1<f64>>,
    /// Activations of each head layer before dropout.
    layer_outputs: Vec<Array1<f64>>,
    /// Inverted-dropout multipliers (0 or 1/(1−p)) per hidden head layer.
    masks: Vec<Option<Array1<f64>>>,
    /// Pre-activation of the output unit.
    pub logit: f64,
    pub score: f64,
}

impl SiameseModel {
    /// All-zero parameters with the shapes `config` declares.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (d, h) = (config.input_dim, config.hidden);
        let mut head = Vec::new();
        let mut width = similarity::feature_dim(h);
        for &w in &config.head_hidden {
            head.push(DenseLayer::zeros(width, w, Activation::Relu));
            width = w;
        }
        head.push(DenseLayer::zeros(width, 1, Activation::Sigmoid));
        let params = SiameseParams {
            branch_a: LstmParams::zeros(d, h),
            branch_b: (!config.shared_weights).then(|| LstmParams::zeros(d, h)),
            head,
        };
        Ok(Self { config, params })
    }

    /// Randomly initialized from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let branch_a = LstmParams::random(config.input_dim, config.hidden, &mut rng);
        let branch_b = (!config.shared_weights)
            .then(|| LstmParams::random(config.input_dim, config.hidden, &mut rng));
        let mut head = Vec::new();
        let mut width = similarity::feature_dim(config.hidden);
        for &h in &config.head_hidden {
            head.push(DenseLayer::random(width, h, Activation::Relu, &mut rng));
            width = h;
        }
        head.push(DenseLayer::random(width, 1, Activation::Sigmoid, &mut rng));
        Ok(Self {
            config,
            params: SiameseParams {
                branch_a,
                branch_b,
                head,
            },
        })
    }

    /// Checks that the parameters have the shapes the config declares.
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        let mismatch = |what: &str| Err(Error::Format(format!("model shape mismatch: {what}")));
        let check = |p: &LstmParams| {
            p.w.dim() == (4 * c.hidden, c.input_dim)
                && p.u.dim() == (4 * c.hidden, c.hidden)
                && p.b.len() == 4 * c.hidden
        };
        if !check(&self.params.branch_a) {
            return mismatch("branch_a");
        }
        match (&self.params.branch_b, c.shared_weights) {
            (None, true) => {}
            (Some(p), false) if check(p) => {}
            _ => return mismatch("branch_b"),
        }
        let head = &self.params.head;
        if head.len() != c.head_hidden.len() + 1 {
            return mismatch("head depth");
        }
        let mut width = similarity::feature_dim(c.hidden);
        for (i, l) in head.iter().enumerate() {
            let last = i + 1 == head.len();
            let (out, act) = if last {
                (1, Activation::Sigmoid)
            } else {
                (c.head_hidden[i], Activation::Relu)
            };
            if l.inputs() != width || l.outputs() != out || l.b.len() != out || l.activation != act
            {
                return mismatch("head layer");
            }
            width = out;
        }
        Ok(())
    }

    pub fn branch_b(&self) -> &LstmParams {
        self.params
            .branch_b
            .as_ref()
            .unwrap_or(&self.params.branch_a)
    }

    /// Scores one pair of sequences, each `T × D`.
    pub fn forward(
        &self,
        ctx_seq: ArrayView2<'_, f64>,
        w2v_seq: ArrayView2<'_, f64>,
        mode: Mode<'_>,
    ) -> Result<ForwardCache> {
        let (a, branch_a) = lstm::branch_forward_cached(ctx_seq, &self.params.branch_a)?;
        let (b, branch_b) = lstm::branch_forward_cached(w2v_seq, self.branch_b())?;
        let features = similarity::features(a.view(), b.view());
        let mut rng = match mode {
            Mode::Train(rng) => Some(rng),
            Mode::Infer => None,
        };
        let p = self.config.dropout;
        let n = self.params.head.len();
        let mut layer_inputs = Vec::with_capacity(n);
        let mut layer_outputs = Vec::with_capacity(n);
        let mut masks = Vec::with_capacity(n);
        let mut x = features.clone();
        let mut logit = 0.0;
        for (i, layer) in self.params.head.iter().enumerate() {
            let z = layer.w.dot(&x) + &layer.b;
            if i + 1 == n {
                logit = z[0];
            }
            let y = z.mapv(|v| layer.activation.apply(v));
            layer_inputs.push(std::mem::replace(&mut x, y.clone()));
            layer_outputs.push(y);
            let mask = match rng.as_deref_mut() {
                Some(rng) if i + 1 < n && p > 0.0 => {
                    let keep = 1.0 / (1.0 - p);
                    let m = Array1::from_shape_fn(x.len(), |_| {
                        if rng.random::<f64>() < p {
                            0.0
                        } else {
                            keep
                        }
                    });
                    x *= &m;
                    Some(m)
                }
                _ => None,
            };
            masks.push(mask);
        }
        let score = x[0];
        Ok(ForwardCache {
            branch_a,
            branch_b,
            a,
            b,
            features,
            layer_inputs,
            layer_outputs,
            masks,
            logit,
            score,
        })
    }

    /// Inference-mode score.
    pub fn predict(
        &self,
        ctx_seq: ArrayView2<'_, f64>,
        w2v_seq: ArrayView2<'_, f64>,
    ) -> Result<f64> {
        Ok(self.forward(ctx_seq, w2v_seq, Mode::Infer)?.score)
    }

    /// Gradients of `bce_loss(cache.score, label)` with respect to every
    /// parameter. With shared weights, both branches' gradients land in
    /// `branch_a`.
    pub fn backward(&self, cache: &ForwardCache, label: u8) -> SiameseParams {
        self.backward_scaled(cache, label, 1.0)
    }

    /// Same as [`backward`](Self::backward) for the loss multiplied by `k`.
    pub fn backward_scaled(&self, cache: &ForwardCache, label: u8, k: f64) -> SiameseParams {
        let mut grads = self.params.zeros_like();
        let s = cache.score;
        let y = f64::from(label);
        // d(bce)/d(logit) = s − y, zero where the clamp is active
        let clamped = !(BCE_EPSILON..=1.0 - BCE_EPSILON).contains(&s);
        let mut dx = Array1::from_elem(1, if clamped { 0.0 } else { k * (s - y) });
        let n = self.params.head.len();
        for i in (0..n).rev() {
            let layer = &self.params.head[i];
            if let Some(m) = &cache.masks[i] {
                dx *= m;
            }
            let dz = if i + 1 == n {
                dx
            } else {
                let out = &cache.layer_outputs[i];
                Array1::from_shape_fn(dx.len(), |j| if out[j] > 0.0 { dx[j] } else { 0.0 })
            };
            let g = &mut grads.head[i];
            let input = &cache.layer_inputs[i];
            for (r, &d) in dz.iter().enumerate() {
                if d != 0.0 {
                    g.w.row_mut(r).scaled_add(d, input);
                }
            }
            g.b += &dz;
            dx = layer.w.t().dot(&dz);
        }
        let h = self.config.hidden;
        let mut da = Array1::zeros(h);
        let mut db = Array1::zeros(h);
        similarity::features_backward(
            cache.a.view(),
            cache.b.view(),
            dx.view(),
            da.view_mut(),
            db.view_mut(),
        );
        let ga = lstm::branch_backward(&cache.branch_a, da.view(), &self.params.branch_a);
        let gb = lstm::branch_backward(&cache.branch_b, db.view(), self.branch_b());
        grads.branch_a = ga;
        match grads.branch_b.as_mut() {
            Some(slot) => *slot = gb,
            None => {
                grads.branch_a.w += &gb.w;
                grads.branch_a.u += &gb.u;
                grads.branch_a.b += &gb.b;
            }
        }
        grads
    }
}

/// `−(y ln s + (1−y) ln(1−s))` with `s` clamped to `[ε, 1−ε]`.
pub fn bce_loss(score: f64, label: u8) -> f64 {
    let s = score.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    if label == 1 {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

/// Stacks `rows` (each of width `dim`) into a `T × dim` sequence, keeping at
/// most `max_len` leading rows.
pub fn sequence_from_rows<'a, I>(rows: I, dim: usize, max_len: usize) -> Array2<f64>
where
    I: IntoIterator<Item = &'a [f32]>,
{
    let mut data = Vec::new();
    let mut t = 0;
    for row in rows.into_iter().take(max_len) {
        data.extend(row.iter().map(|&x| f64::from(x)));
        t += 1;
    }
    Array2::from_shape_vec((t, dim), data).expect("rows have width dim")
}

/// A single vector as a length-1 sequence.
pub fn single_step(v: ArrayView1<'_, f64>) -> Array2<f64> {
    v.to_owned().insert_axis(ndarray::Axis(0))
}
