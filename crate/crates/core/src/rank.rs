//! The common ranking interface shared by baselines, the neural ranker,
//! evaluation and serving.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::features::ContextState;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuery {
    pub query: String,
    pub score: f64,
}

/// Candidates in ranked order, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub ranker: String,
    pub items: Vec<ScoredQuery>,
}

impl RankedList {
    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|s| s.query.as_str())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RankRequest<'a> {
    pub prefix: &'a str,
    pub candidates: &'a [String],
    pub context: &'a ContextState,
}

pub trait Ranker: Send + Sync {
    fn id(&self) -> &str;

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankedList>;
}

/// Total order used by every ranker: score descending, then a secondary key
/// descending, then query text ascending.
pub fn ranking_order(a: (f64, f64, &str), b: (f64, f64, &str)) -> Ordering {
    b.0.total_cmp(&a.0)
        .then_with(|| b.1.total_cmp(&a.1))
        .then_with(|| a.2.cmp(b.2))
}
