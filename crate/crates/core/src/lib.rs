//! Counterfactual contrastive debiasing of clinical embedding tables.
//!
//! The pipeline: pick the features that carry a sensitive attribute, build a
//! counterfactual twin of every record by swapping those features to the other
//! class's means, train an encoder that pulls each record towards its twin,
//! then audit the embeddings with single-category WEAT effect sizes and score
//! them on downstream classifiers.

pub mod counterfactual;
pub mod dataset;
pub mod downstream;
pub mod error;
pub mod experiment;
pub mod fairness;
pub mod numerics;
pub mod preprocess;
pub mod trainer;

pub use error::{Error, ErrorKind, Result};
