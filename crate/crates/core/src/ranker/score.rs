//! Inference: score candidates with a trained network and rank them.

use std::sync::Arc;

use super::checkpoint::Checkpoint;
use super::network::Network;
use crate::embedding::EmbeddingTable;
use crate::features::{FeatureVector, Featurizer};
use crate::rank::{ranking_order, RankRequest, RankedList, Ranker, ScoredQuery};
use crate::stats::StatsStore;
use crate::Result;

pub const NEURAL_ID: &str = "neural";

/// Default ranker id for a checkpoint, naming any ablation it was trained
/// with.
pub fn default_ranker_id(checkpoint: &Checkpoint) -> String {
    let cfg = &checkpoint.network.config;
    let mut id = NEURAL_ID.to_string();
    if cfg.ablate_delta_ndcg {
        id.push_str("-no-delta-ndcg");
    }
    if cfg.ablate_context {
        id.push_str("-no-context");
    }
    id
}

/// Scores every candidate with dropout off and sorts by score, then by
/// decayed popularity, then by query text.
pub fn score_candidates(
    ranker: &str,
    network: &Network,
    candidates: &[(&str, &FeatureVector)],
) -> Result<RankedList> {
    let mut scored = Vec::with_capacity(candidates.len());
    for (query, features) in candidates {
        let score = network.score(features)?;
        scored.push((score, features.decayed_popularity(), *query));
    }
    scored.sort_by(|a, b| ranking_order(*a, *b));
    Ok(RankedList {
        ranker: ranker.to_string(),
        items: scored
            .into_iter()
            .map(|(score, _, q)| ScoredQuery {
                query: q.to_string(),
                score,
            })
            .collect(),
    })
}

/// A checkpoint bound to the stats and embeddings it featurizes with.
#[derive(Debug, Clone)]
pub struct NeuralRanker {
    id: String,
    checkpoint: Arc<Checkpoint>,
    stats: Arc<StatsStore>,
    embeddings: Arc<EmbeddingTable>,
}

impl NeuralRanker {
    /// Fails when the stats or embeddings do not fit the checkpoint's
    /// feature layout.
    pub fn new(
        id: impl Into<String>,
        checkpoint: Arc<Checkpoint>,
        stats: Arc<StatsStore>,
        embeddings: Arc<EmbeddingTable>,
    ) -> Result<Self> {
        Featurizer::new(&checkpoint.layout, &stats, &embeddings)?;
        Ok(NeuralRanker {
            id: id.into(),
            checkpoint,
            stats,
            embeddings,
        })
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.checkpoint
    }
}

impl Ranker for NeuralRanker {
    fn id(&self) -> &str {
        &self.id
    }

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankedList> {
        let featurizer = Featurizer::new(&self.checkpoint.layout, &self.stats, &self.embeddings)?;
        let features = request
            .candidates
            .iter()
            .map(|c| featurizer.featurize(c, request.prefix, request.context))
            .collect::<Result<Vec<_>>>()?;
        let items: Vec<(&str, &FeatureVector)> = request
            .candidates
            .iter()
            .map(String::as_str)
            .zip(features.iter())
            .collect();
        score_candidates(&self.id, &self.checkpoint.network, &items)
    }
}
