//! Two-stage hostility detection for short social-media posts.
//!
//! The coarse stage decides hostile vs. non-hostile; the fine stage assigns
//! any of four hostile labels (fake, hate, offensive, defamation). Models
//! consume precomputed 768-d sentence embeddings stored in the EMB1 format:
//!
//! * [`mlp`]: one-hidden-layer network trained with AdamW; its hidden layer
//!   doubles as the fine-tuned representation.
//! * [`gbdt`]: second-order boosted trees with a logistic objective.
//! * [`ensemble`]: F1-weighted fusion of multi-hot outputs.
//! * [`metrics`]: per-class and support-weighted F1.
//! * [`pipeline`]: the five submission presets wired end to end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corpus;
pub mod embedding_store;
pub mod ensemble;
mod error;
pub mod gbdt;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod pipeline;
pub mod predictions;
pub mod reference;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::Matrix;
