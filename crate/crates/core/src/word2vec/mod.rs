//! Skip-gram word embeddings trained with negative sampling.
//!
//! [`train_skipgram`] builds a [`Vocabulary`] from cleaned reviews and returns
//! a [`SkipGramModel`]. Downstream stages only need the published input-side
//! vectors, exposed as [`KeyedVectors`]; that is also what the `W2V1` binary
//! and the text format store.

mod io;
mod sampling;
mod train;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::TokenizedReview;

pub use io::{read_text, read_w2v, write_text, write_w2v};
pub use sampling::{training_pairs, NegativeSampler, WindowMode};
pub use train::{
    sgns_example, train_skipgram, train_skipgram_with_vocab, EmbeddingMatrix, SkipGramModel,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: Vec<u64>,
    min_count: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn count(&self, index: usize) -> u64 {
        self.counts[index]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Maps tokens to indices, dropping out-of-vocabulary tokens.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.index_of(t)).collect()
    }
}

/// Index order is descending frequency with lexicographic tie-breaks.
pub fn build_vocab(corpus: &[TokenizedReview], min_count: u64) -> Vocabulary {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for review in corpus {
        for t in &review.tokens {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let index = tokens
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();
    Vocabulary {
        tokens,
        index,
        counts: kept.iter().map(|&(_, c)| c).collect(),
        min_count,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct W2VConfig {
    pub dim: usize,
    pub window: usize,
    pub min_count: u64,
    pub workers: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Use the full window for every center word instead of sampling its
    /// width uniformly from `1..=window`.
    pub fixed_window: bool,
}

impl Default for W2VConfig {
    fn default() -> Self {
        Self {
            dim: 384,
            window: 5,
            min_count: 1,
            workers: 5,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            seed: 42,
            fixed_window: false,
        }
    }
}

impl W2VConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::Config(format!("w2v.{field}: {why}")));
        if self.dim == 0 {
            return bad("dim", "must be positive");
        }
        if self.window == 0 {
            return bad("window", "must be at least 1");
        }
        if self.negatives == 0 {
            return bad("negatives", "must be at least 1");
        }
        if self.workers == 0 {
            return bad("workers", "must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        Ok(())
    }

    pub fn window_mode(&self) -> WindowMode {
        if self.fixed_window {
            WindowMode::Fixed
        } else {
            WindowMode::Dynamic
        }
    }
}

/// Token → vector lookup table.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyedVectors {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f32>,
}

impl KeyedVectors {
    pub fn new(tokens: Vec<String>, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != tokens.len() * dim {
            return Err(Error::Dimension {
                expected: tokens.len() * dim,
                found: data.len(),
            });
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate token `{t}`")));
            }
        }
        Ok(Self {
            tokens,
            index,
            dim,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn vector(&self, index: usize) -> &[f32] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.index_of(token).map(|i| self.vector(i))
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Vocabulary indices of the in-vocabulary tokens, in order.
    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().filter_map(|t| self.index_of(t)).collect()
    }
}

/// One vector per in-vocabulary token of the review, in token order.
pub fn embed_tokens<'a>(review: &TokenizedReview, vectors: &'a KeyedVectors) -> Vec<&'a [f32]> {
    review
        .tokens
        .iter()
        .filter_map(|t| vectors.get(t))
        .collect()
}

fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x as f64, y as f64);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// The `k` tokens closest to `token` by cosine, most similar first. The query
/// itself is excluded.
pub fn nearest_neighbors(
    token: &str,
    k: usize,
    vectors: &KeyedVectors,
) -> Result<Vec<(String, f64)>> {
    let q = vectors
        .index_of(token)
        .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
    let query = vectors.vector(q);
    let mut scored: Vec<(usize, f64)> = (0..vectors.len())
        .filter(|&i| i != q)
        .map(|i| (i, cosine(query, vectors.vector(i))))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(i, c)| (vectors.tokens[i].clone(), c))
        .collect())
}
