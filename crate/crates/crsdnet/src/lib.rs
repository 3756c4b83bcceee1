//! Opinion-spammer detection on review graphs.
//!
//! The pipeline extracts behavioral features from raw reviews, trains a
//! random forest (or falls back to unsupervised threshold scores) to get
//! per-user and per-pair spam potentials, builds a user-user clique graph
//! from co-reviewed products, sparsifies it, and runs loopy belief
//! propagation on the resulting pairwise Markov random field. Users are
//! ranked by their posterior spam belief.

pub mod active;
pub mod data_model;
pub mod error;
pub mod features;
pub mod forest;
pub mod graph;
pub mod lbp;
pub mod metrics;
pub mod pipeline;
pub mod potentials;
pub mod synth;

pub use error::{CrsdError, Result};
