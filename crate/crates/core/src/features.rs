//! Feature layout for the ranker.
//!
//! Every candidate becomes three blocks:
//!
//! * dense (6): candidate length, prefix length, prefix/candidate length
//!   ratio, decayed popularity, decayed GMV, exact-prefix-match flag;
//! * series (H): daily popularity, oldest day first, fed to the recurrent
//!   layer;
//! * context (K + 3): cosine to each of the last K past queries (newest
//!   first, 0 when absent or out of vocabulary), their max, their mean and a
//!   context-presence flag.
//!
//! The layout is versioned and stored in checkpoints so a model can refuse
//! features built differently from the ones it was trained on.

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingTable;
use crate::session::PastQuery;
use crate::stats::{BehaviorStats, StatsStore, DEFAULT_HALF_LIFE_DAYS, DEFAULT_SERIES_DAYS};
use crate::text::{match_key, prefix_key};
use crate::{Error, Result};

pub const LAYOUT_VERSION: u32 = 1;
pub const DEFAULT_PAST_K: usize = 3;

pub const DENSE_CANDIDATE_LEN: usize = 0;
pub const DENSE_PREFIX_LEN: usize = 1;
pub const DENSE_LEN_RATIO: usize = 2;
pub const DENSE_POPULARITY: usize = 3;
pub const DENSE_GMV: usize = 4;
pub const DENSE_EXACT_PREFIX: usize = 5;
pub const DENSE_NAMES: [&str; 6] = [
    "candidate_len",
    "prefix_len",
    "prefix_candidate_ratio",
    "decayed_popularity",
    "decayed_gmv",
    "exact_prefix_match",
];

/// Describes the shape and meaning of a [`FeatureVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub version: u32,
    pub dense: Vec<String>,
    pub series_len: usize,
    pub past_k: usize,
    pub half_life_days: f64,
    pub embedding_dim: usize,
}

impl FeatureLayout {
    pub fn new(series_len: usize, past_k: usize, half_life_days: f64, embedding_dim: usize) -> Self {
        FeatureLayout {
            version: LAYOUT_VERSION,
            dense: DENSE_NAMES.iter().map(|s| s.to_string()).collect(),
            series_len,
            past_k,
            half_life_days,
            embedding_dim,
        }
    }

    pub fn standard(embedding_dim: usize) -> Self {
        Self::new(
            DEFAULT_SERIES_DAYS,
            DEFAULT_PAST_K,
            DEFAULT_HALF_LIFE_DAYS,
            embedding_dim,
        )
    }

    pub fn dense_len(&self) -> usize {
        self.dense.len()
    }

    pub fn context_len(&self) -> usize {
        self.past_k + 3
    }

    pub fn total_len(&self) -> usize {
        self.dense_len() + self.series_len + self.context_len()
    }

    /// Names the first field where `other` disagrees.
    pub fn check_compatible(&self, other: &FeatureLayout) -> Result<()> {
        let mismatch = |what: &str, a: String, b: String| {
            Err(Error::LayoutMismatch(format!("{what}: expected {a}, got {b}")))
        };
        if self.version != other.version {
            return mismatch("layout version", self.version.to_string(), other.version.to_string());
        }
        if self.dense != other.dense {
            return mismatch("dense features", self.dense.join(","), other.dense.join(","));
        }
        if self.series_len != other.series_len {
            return mismatch("series_len", self.series_len.to_string(), other.series_len.to_string());
        }
        if self.past_k != other.past_k {
            return mismatch("past_k", self.past_k.to_string(), other.past_k.to_string());
        }
        if self.half_life_days != other.half_life_days {
            return mismatch(
                "half_life_days",
                self.half_life_days.to_string(),
                other.half_life_days.to_string(),
            );
        }
        if self.embedding_dim != other.embedding_dim {
            return mismatch(
                "embedding_dim",
                self.embedding_dim.to_string(),
                other.embedding_dim.to_string(),
            );
        }
        Ok(())
    }
}

/// The last K past searches, newest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContextState {
    entries: Vec<PastQuery>,
}

impl ContextState {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Keeps the `k` most recent searches from an unordered history.
    pub fn from_history(history: &[PastQuery], k: usize) -> Self {
        let mut entries: Vec<PastQuery> = history.to_vec();
        entries.sort_by(|a, b| b.ts().cmp(&a.ts()));
        entries.truncate(k);
        ContextState { entries }
    }

    pub fn entries(&self) -> &[PastQuery] {
        &self.entries
    }

    pub fn is_present(&self) -> bool {
        !self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub dense: Vec<f64>,
    pub series: Vec<f64>,
    pub context: Vec<f64>,
}

impl FeatureVector {
    pub fn decayed_popularity(&self) -> f64 {
        self.dense[DENSE_POPULARITY]
    }

    pub fn is_finite(&self) -> bool {
        self.dense
            .iter()
            .chain(&self.series)
            .chain(&self.context)
            .all(|v| v.is_finite())
    }
}

/// Builds the feature vector for one candidate.
pub fn featurize(
    candidate: &str,
    prefix: &str,
    stats: &BehaviorStats,
    ctx: &ContextState,
    embeddings: &EmbeddingTable,
    layout: &FeatureLayout,
) -> Result<FeatureVector> {
    if embeddings.dim() != layout.embedding_dim {
        return Err(Error::DimensionMismatch {
            expected: layout.embedding_dim,
            actual: embeddings.dim(),
        });
    }
    if stats.daily_counts.len() != layout.series_len {
        return Err(Error::DimensionMismatch {
            expected: layout.series_len,
            actual: stats.daily_counts.len(),
        });
    }
    let cand = match_key(candidate);
    let pre = prefix_key(prefix);
    let cand_len = cand.chars().count();
    let pre_len = pre.chars().count();
    let ratio = (pre_len.max(1) as f64 / cand_len.max(1) as f64).min(1.0);
    let exact = if cand.starts_with(&pre) { 1.0 } else { 0.0 };
    let dense = vec![
        cand_len as f64,
        pre_len as f64,
        ratio,
        stats.decayed_popularity,
        stats.decayed_gmv,
        exact,
    ];

    let k = layout.past_k;
    let mut context = vec![0.0; layout.context_len()];
    let present: Vec<f64> = ctx
        .entries()
        .iter()
        .take(k)
        .map(|pq| embeddings.query_similarity(candidate, pq.query()).value)
        .collect();
    if !present.is_empty() {
        context[..present.len()].copy_from_slice(&present);
        context[k] = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        context[k + 1] = present.iter().sum::<f64>() / present.len() as f64;
        context[k + 2] = 1.0;
    }

    Ok(FeatureVector {
        dense,
        series: stats.daily_counts.clone(),
        context,
    })
}

/// Shared read-only inputs for featurizing many candidates.
#[derive(Debug, Clone, Copy)]
pub struct Featurizer<'a> {
    pub layout: &'a FeatureLayout,
    pub stats: &'a StatsStore,
    pub embeddings: &'a EmbeddingTable,
}

impl<'a> Featurizer<'a> {
    pub fn new(
        layout: &'a FeatureLayout,
        stats: &'a StatsStore,
        embeddings: &'a EmbeddingTable,
    ) -> Result<Self> {
        if stats.days() != layout.series_len {
            return Err(Error::LayoutMismatch(format!(
                "series_len: expected {}, stats carry {} days",
                layout.series_len,
                stats.days()
            )));
        }
        if stats.half_life_days() != layout.half_life_days {
            return Err(Error::LayoutMismatch(format!(
                "half_life_days: expected {}, stats use {}",
                layout.half_life_days,
                stats.half_life_days()
            )));
        }
        if embeddings.dim() != layout.embedding_dim {
            return Err(Error::LayoutMismatch(format!(
                "embedding_dim: expected {}, got {}",
                layout.embedding_dim,
                embeddings.dim()
            )));
        }
        Ok(Featurizer {
            layout,
            stats,
            embeddings,
        })
    }

    pub fn featurize(&self, candidate: &str, prefix: &str, ctx: &ContextState) -> Result<FeatureVector> {
        featurize(
            candidate,
            prefix,
            &self.stats.get(candidate),
            ctx,
            self.embeddings,
            self.layout,
        )
    }
}
