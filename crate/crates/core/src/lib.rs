//! Word-embedding convolutional text classifier benchmarked against
//! bag-of-words baselines (naive Bayes, k-nearest neighbours, linear
//! discriminant analysis, SVM) on binary toxic-comment detection.
//!
//! Data-parallel loops (per-example CNN passes, kNN queries, benchmark
//! repetitions, pairwise distances) go through [`exec`], which uses rayon
//! when the default `parallel` feature is on. Reductions always run in a
//! fixed order, so results are bit-identical in either mode.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bow;
pub mod classifiers;
pub mod cnn;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod exec;
pub mod numerics;
pub mod textprep;
pub mod viz;

pub use error::{Error, Result};
pub use exec::Exec;

/// Bundled synthetic corpus (≈200 comments) for offline runs and tests.
pub const MICRO_CORPUS: &str = include_str!("../data/micro_corpus.csv");

/// Small word-vector file covering the micro corpus (dimension 16).
pub const MICRO_VECTORS: &str = include_str!("../data/micro_vectors.txt");

/// Published mean/std reference values per method (accuracy, specificity,
/// FDR), for side-by-side comparison only.
pub const PUBLISHED_REFERENCE: &str = include_str!("../data/published_reference.csv");
