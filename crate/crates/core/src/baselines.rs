//! Popularity baselines: MostPopularCompletion ranks by decayed search
//! popularity, MostPopularGMVCompletion by decayed GMV.

use std::collections::HashMap;
use std::sync::Arc;

use crate::rank::{ranking_order, RankRequest, RankedList, Ranker, ScoredQuery};
use crate::stats::StatsStore;
use crate::text::match_key;
use crate::Result;

pub const MPC_ID: &str = "mpc";
pub const MPGC_ID: &str = "mpgc";

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Popularity {
    pub decayed_popularity: f64,
    pub decayed_gmv: f64,
}

#[derive(Debug, Clone, Default)]
pub struct PopularityIndex {
    entries: HashMap<String, Popularity>,
}

impl PopularityIndex {
    pub fn from_stats(stats: &StatsStore) -> Self {
        let entries = stats
            .records()
            .into_iter()
            .map(|r| {
                let s = stats.get(&r.query);
                (
                    r.query,
                    Popularity {
                        decayed_popularity: s.decayed_popularity,
                        decayed_gmv: s.decayed_gmv,
                    },
                )
            })
            .collect();
        PopularityIndex { entries }
    }

    pub fn insert(&mut self, query: &str, popularity: Popularity) {
        self.entries.insert(match_key(query), popularity);
    }

    pub fn get(&self, query: &str) -> Popularity {
        self.entries
            .get(&match_key(query))
            .copied()
            .unwrap_or_default()
    }
}

fn rank_by(
    id: &str,
    candidates: &[String],
    index: &PopularityIndex,
    key: impl Fn(&Popularity) -> f64,
) -> RankedList {
    let mut scored: Vec<(f64, &String)> = candidates
        .iter()
        .map(|c| (key(&index.get(c)), c))
        .collect();
    scored.sort_by(|a, b| ranking_order((a.0, 0.0, a.1), (b.0, 0.0, b.1)));
    RankedList {
        ranker: id.to_string(),
        items: scored
            .into_iter()
            .map(|(score, q)| ScoredQuery {
                query: q.clone(),
                score,
            })
            .collect(),
    }
}

pub fn mpc_rank(candidates: &[String], index: &PopularityIndex) -> RankedList {
    rank_by(MPC_ID, candidates, index, |p| p.decayed_popularity)
}

pub fn mpgc_rank(candidates: &[String], index: &PopularityIndex) -> RankedList {
    rank_by(MPGC_ID, candidates, index, |p| p.decayed_gmv)
}

#[derive(Debug, Clone)]
pub struct MpcRanker {
    index: Arc<PopularityIndex>,
}

impl MpcRanker {
    pub fn new(index: Arc<PopularityIndex>) -> Self {
        MpcRanker { index }
    }
}

impl Ranker for MpcRanker {
    fn id(&self) -> &str {
        MPC_ID
    }

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankedList> {
        Ok(mpc_rank(request.candidates, &self.index))
    }
}

#[derive(Debug, Clone)]
pub struct MpgcRanker {
    index: Arc<PopularityIndex>,
}

impl MpgcRanker {
    pub fn new(index: Arc<PopularityIndex>) -> Self {
        MpgcRanker { index }
    }
}

impl Ranker for MpgcRanker {
    fn id(&self) -> &str {
        MPGC_ID
    }

    fn rank(&self, request: &RankRequest<'_>) -> Result<RankedList> {
        Ok(mpgc_rank(request.candidates, &self.index))
    }
}
