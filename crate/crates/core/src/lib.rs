//! Fake product review detection.
//!
//! The pipeline has five stages, each in its own module:
//!
//! 1. [`corpus`] loads the labelled review CSV, reports per-category
//!    statistics and produces a stratified train/validation split.
//! 2. [`preprocess`] turns raw review text into clean lemmatized tokens.
//! 3. [`word2vec`] trains skip-gram embeddings with negative sampling;
//!    [`context`] supplies one review-level vector per review.
//! 4. [`siamese`] encodes both embedding streams with separate LSTM branches,
//!    compares them and scores the review with a small dense head.
//! 5. [`fuzzy`] turns the score into the final Real/Fake decision.
//!
//! [`pipeline`] glues the stages together for the command-line front end.
//!
//! The guide in `book/` walks through each stage with runnable snippets.

pub mod context;
pub mod corpus;
pub mod error;
pub mod fuzzy;
pub mod pipeline;
pub mod preprocess;
pub mod siamese;
pub mod word2vec;

mod binio;
mod book;

pub use error::{Error, Result};
