//! Glue between the stages: model inputs per review, fuzzy post-processing
//! of sigmoid scores, and single-text classification.
//!
//! The network scores the probability that a review is computer-generated.
//! The fuzzy stage reads its input as authenticity (1 = real), so scores are
//! passed through [`authenticity`] on the way in.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::context::{fallback_embed, ContextProvider};
use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::fuzzy::{FuzzyConfig, FuzzyDecision, HISTOGRAM_BINS};
use crate::preprocess::{clean_text, StopwordList, TokenizedReview};
use crate::siamese::{
    predict_all, sequence_from_rows, Metrics, SampleSource, SiameseModel, DECISION_THRESHOLD,
};
use crate::word2vec::KeyedVectors;

/// Fuzzy decisions at or above this confidence count as confident. With the
/// default sets the centroid stays inside about `[0.2575, 0.7425]`, so
/// confidence never exceeds about 0.485.
pub const CONFIDENCE_LEVEL: f64 = 0.25;

pub fn authenticity(score: f64) -> f64 {
    1.0 - score
}

/// Compact per-review model input: the contextual vector plus in-vocabulary
/// token indices, already truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct ReviewInput {
    pub review_id: u64,
    pub label: u8,
    pub context: Vec<f32>,
    pub tokens: Vec<u32>,
}

/// Model inputs for a set of reviews. Token sequences are expanded to
/// vectors only when a sample is requested, which keeps memory linear in
/// the number of tokens rather than tokens × dimension.
#[derive(Debug, Clone)]
pub struct FeatureSet<'a> {
    vectors: &'a KeyedVectors,
    rows: Vec<ReviewInput>,
}

impl<'a> FeatureSet<'a> {
    /// One row per `(review, label)`. Contextual vectors come from
    /// `provider`; a store miss falls back to the skip-gram mean.
    pub fn build(
        reviews: &[(TokenizedReview, Label)],
        vectors: &'a KeyedVectors,
        provider: &ContextProvider<'_>,
        max_seq_len: usize,
    ) -> Result<Self> {
        let dim = vectors.dim();
        let rows = reviews
            .par_iter()
            .map(|(review, label)| {
                let context = provider
                    .get(review, Some(vectors))
                    .expect("provider with fallback is total");
                if context.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        found: context.len(),
                    });
                }
                let tokens = vectors
                    .encode(&review.tokens)
                    .into_iter()
                    .take(max_seq_len)
                    .map(|i| i as u32)
                    .collect();
                Ok(ReviewInput {
                    review_id: review.review_id,
                    label: label.class(),
                    context,
                    tokens,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { vectors, rows })
    }

    pub fn rows(&self) -> &[ReviewInput] {
        &self.rows
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.label).collect()
    }
}

/// The `(context, tokens)` sequences for one row.
pub fn model_inputs(row: &ReviewInput, vectors: &KeyedVectors) -> (Array2<f64>, Array2<f64>) {
    let dim = vectors.dim();
    let ctx = sequence_from_rows(std::iter::once(row.context.as_slice()), dim, 1);
    let seq = sequence_from_rows(
        row.tokens.iter().map(|&i| vectors.vector(i as usize)),
        dim,
        usize::MAX,
    );
    (ctx, seq)
}

impl SampleSource for FeatureSet<'_> {
    fn len(&self) -> usize {
        self.rows.len()
    }

    fn label(&self, i: usize) -> u8 {
        self.rows[i].label
    }

    fn inputs(&self, i: usize) -> Result<(Array2<f64>, Array2<f64>)> {
        Ok(model_inputs(&self.rows[i], self.vectors))
    }
}

/// Fuzzy-stage results over a labeled batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyEvaluation {
    pub metrics: Metrics,
    pub correct_count: u64,
    /// Decisions whose confidence reaches `confidence_level`.
    pub confident_count: u64,
    pub confidence_level: f64,
    pub threshold: f64,
    /// Crisp outputs in equal bins over `[0, 1]`.
    pub histogram: Vec<u64>,
}

/// Runs every sigmoid score through the fuzzy classifier and scores the
/// resulting decisions against `labels` (1 = computer-generated).
pub fn fuzzy_evaluate(
    scores: &[f64],
    labels: &[u8],
    fuzzy: &FuzzyConfig,
) -> Result<FuzzyEvaluation> {
    let inputs: Vec<f64> = scores.iter().map(|&s| authenticity(s)).collect();
    let batch = crate::fuzzy::classify_batch(&inputs, &fuzzy.sets, fuzzy.threshold)?;
    let predicted: Vec<u8> = batch.decisions.iter().map(|d| d.label.class()).collect();
    let metrics = Metrics::from_predictions(&predicted, labels)?;
    let confident_count = batch
        .decisions
        .iter()
        .filter(|d| d.confidence >= CONFIDENCE_LEVEL)
        .count() as u64;
    debug_assert_eq!(batch.histogram.len(), HISTOGRAM_BINS);
    Ok(FuzzyEvaluation {
        correct_count: metrics.confusion.tp + metrics.confusion.tn,
        metrics,
        confident_count,
        confidence_level: CONFIDENCE_LEVEL,
        threshold: fuzzy.threshold,
        histogram: batch.histogram,
    })
}

/// Sigmoid and fuzzy metrics side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub split: String,
    pub sigmoid: Metrics,
    pub fuzzy: FuzzyEvaluation,
}

pub fn evaluate_feature_set(
    model: &SiameseModel,
    features: &FeatureSet<'_>,
    fuzzy: &FuzzyConfig,
    split: &str,
) -> Result<EvaluationReport> {
    if features.is_empty() {
        return Err(Error::Argument(format!("{split} set is empty")));
    }
    let scores = predict_all(model, features)?;
    let labels = features.labels();
    Ok(EvaluationReport {
        split: split.to_string(),
        sigmoid: crate::siamese::evaluate_scores(&scores, &labels)?,
        fuzzy: fuzzy_evaluate(&scores, &labels, fuzzy)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextClassification {
    pub tokens: Vec<String>,
    pub known_tokens: usize,
    /// Sigmoid output, probability of computer-generated.
    pub sigmoid_score: f64,
    pub sigmoid_label: Label,
    pub fuzzy: FuzzyDecision,
    pub label: Label,
    /// True when no token survived cleaning or all were unknown, so both
    /// branches saw the zero-vector path.
    pub empty: bool,
}

/// Cleans and scores free text. There is no review id, so the contextual
/// input always comes from the skip-gram mean.
pub fn classify_text(
    text: &str,
    stopwords: &StopwordList,
    vectors: &KeyedVectors,
    model: &SiameseModel,
    fuzzy: &FuzzyConfig,
) -> Result<TextClassification> {
    if vectors.dim() != model.config.input_dim {
        return Err(Error::Dimension {
            expected: model.config.input_dim,
            found: vectors.dim(),
        });
    }
    let tokens = clean_text(text, stopwords);
    let review = TokenizedReview {
        review_id: 0,
        tokens: tokens.clone(),
    };
    let context = fallback_embed(&review, vectors);
    let ids: Vec<u32> = vectors
        .encode(&tokens)
        .into_iter()
        .take(model.config.max_seq_len)
        .map(|i| i as u32)
        .collect();
    let row = ReviewInput {
        review_id: 0,
        label: 0,
        context,
        tokens: ids,
    };
    let (ctx, seq) = model_inputs(&row, vectors);
    let score = model.predict(ctx.view(), seq.view())?;
    let decision = fuzzy.classify(authenticity(score))?;
    Ok(TextClassification {
        known_tokens: row.tokens.len(),
        empty: row.tokens.is_empty(),
        tokens,
        sigmoid_score: score,
        sigmoid_label: if score >= DECISION_THRESHOLD {
            Label::Cg
        } else {
            Label::Og
        },
        label: decision.label,
        fuzzy: decision,
    })
}
