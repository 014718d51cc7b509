//! Node classification on project graphs with semantic label encodings.
//!
//! A three-layer GraphSAGE network is trained either against one-hot
//! targets with a softmax head or against dense label embeddings with the
//! cosine embedding loss, in which case predictions are decoded to the label
//! whose embedding is nearest by cosine similarity. Encodings are compared by
//! leave-one-project-out cross-validation and a normality-gated paired test
//! on per-class F1 scores.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod graph_data;
pub mod label_encoding;
pub mod sage_model;
pub mod stats;
pub mod training;

pub use error::{Error, Result};
