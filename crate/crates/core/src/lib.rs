//! Core library for context-aware query autocompletion ranking.
//!
//! The pipeline runs from raw autocomplete session logs to a served ranking:
//!
//! * [`session`] parses session logs, labels impressions and extracts
//!   weighted positive/negative training pairs.
//! * [`embedding`] learns whole-query embeddings with skipgram and negative
//!   sampling over sessionized search streams.
//! * [`features`] turns a candidate plus its context into the fixed feature
//!   layout consumed by the ranker.
//! * [`ranker`] is the siamese pairwise network, its loss, training loop and
//!   checkpoint format.
//! * [`baselines`] holds the popularity rankers used as benchmarks.
//! * [`metrics`] computes weighted MRR / NDCG@p and the context slice report.
//! * [`trie`] does candidate matching for serving.
//! * [`prepare`] splits a session log into training pairs and held-out
//!   evaluation impressions.
//! * [`synth`] generates synthetic session data with known structure.

pub mod baselines;
pub mod embedding;
pub mod error;
pub mod features;
pub mod metrics;
pub mod prepare;
pub mod rank;
pub mod ranker;
pub mod session;
pub mod stats;
pub mod synth;
pub mod text;
pub mod trie;

pub use error::{Error, Result};
