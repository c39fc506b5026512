//! Live suggestion service: trie matching, per-session search context and
//! ranking with any registered ranker, exposed over HTTP.
//!
//! ```text
//! GET  /suggest?prefix=&session_id=&k=10&ranker=   -> 200 SuggestResponse, 400 unknown ranker
//! POST /submit {"session_id", "query"}             -> 204
//! GET  /rankers                                    -> 200 ["mpc", ...]
//! GET  /health                                     -> 200 {"status", "model_version"}
//! ```

mod context;
mod http;

use std::sync::Arc;
use std::time::Instant;

use acrank_core::features::ContextState;
use acrank_core::rank::{RankRequest, Ranker, ScoredQuery};
use acrank_core::trie::PrefixTrie;
use serde::{Deserialize, Serialize};

pub use context::{Clock, ContextStore, ManualClock, SystemClock, DEFAULT_CONTEXT_TTL_MS};
pub use http::{router, serve};

pub const DEFAULT_K: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("unknown ranker '{0}'")]
    UnknownRanker(String),
    #[error("no rankers registered")]
    NoRankers,
    #[error("duplicate ranker id '{0}'")]
    DuplicateRanker(String),
    #[error("ranking failed: {0}")]
    Ranking(#[from] acrank_core::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub ranker: String,
    pub suggestions: Vec<ScoredQuery>,
    pub latency_ms: f64,
}

pub struct SuggestService {
    trie: PrefixTrie,
    rankers: Vec<Arc<dyn Ranker>>,
    contexts: ContextStore,
    model_version: String,
}

impl SuggestService {
    /// The first ranker is the default for requests that name none.
    pub fn new(
        trie: PrefixTrie,
        rankers: Vec<Arc<dyn Ranker>>,
        contexts: ContextStore,
        model_version: impl Into<String>,
    ) -> Result<Self, ServeError> {
        if rankers.is_empty() {
            return Err(ServeError::NoRankers);
        }
        for (i, r) in rankers.iter().enumerate() {
            if rankers[..i].iter().any(|o| o.id() == r.id()) {
                return Err(ServeError::DuplicateRanker(r.id().to_string()));
            }
        }
        Ok(SuggestService {
            trie,
            rankers,
            contexts,
            model_version: model_version.into(),
        })
    }

    pub fn ranker_ids(&self) -> Vec<String> {
        self.rankers.iter().map(|r| r.id().to_string()).collect()
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn contexts(&self) -> &ContextStore {
        &self.contexts
    }

    fn ranker(&self, id: Option<&str>) -> Result<&Arc<dyn Ranker>, ServeError> {
        match id {
            None | Some("") => Ok(&self.rankers[0]),
            Some(id) => self
                .rankers
                .iter()
                .find(|r| r.id() == id)
                .ok_or_else(|| ServeError::UnknownRanker(id.to_string())),
        }
    }

    /// Matches `prefix`, ranks the shortlist with the session's context
    /// and keeps the top `k`. Unknown or absent sessions rank without
    /// context.
    pub fn suggest(
        &self,
        prefix: &str,
        session_id: Option<&str>,
        k: usize,
        ranker: Option<&str>,
    ) -> Result<SuggestResponse, ServeError> {
        let start = Instant::now();
        let ranker = self.ranker(ranker)?;
        let candidates: Vec<String> = self.trie.lookup(prefix).into_iter().map(str::to_string).collect();
        let context = match session_id {
            Some(id) => ContextState::from_history(&self.contexts.recent(id), self.contexts.capacity()),
            None => ContextState::empty(),
        };
        let mut ranked = ranker.rank(&RankRequest {
            prefix,
            candidates: &candidates,
            context: &context,
        })?;
        ranked.items.truncate(k);
        Ok(SuggestResponse {
            ranker: ranked.ranker,
            suggestions: ranked.items,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    pub fn record_submission(&self, session_id: &str, query: &str) {
        self.contexts.record(session_id, query);
    }
}
