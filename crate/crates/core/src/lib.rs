//! Memorization audit toolkit for LSTM-based clinical de-identification taggers.
//!
//! The crate trains a character-aware BiLSTM(-CRF) tagger over BIO-annotated
//! clinical text and then asks whether the trained model leaks patient names:
//!
//! - [`corpus`]: tokenization, CoNLL-style I/O, name dictionaries and a
//!   synthetic report generator.
//! - [`embeddings`]: the frozen token-embedding table.
//! - [`neural`]: LSTM, feed-forward and linear-chain CRF layers with
//!   hand-written backward passes, SGD and gradient checking.
//! - [`tagger`]: the three-layer tagger, its evaluation and the extraction of
//!   per-token label probabilities at name positions.
//! - [`perturb`]: inside/outside name substitution datasets.
//! - [`stats`]: empirical distributions, the two-sample KS test and curve
//!   exports.
//! - [`attacks`]: cut-off attacks and the shadow-model membership inference
//!   attack.

pub mod attacks;
pub mod corpus;
pub mod embeddings;
mod error;
pub mod neural;
pub mod perturb;
pub mod seed;
pub mod stats;
pub mod tagger;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
