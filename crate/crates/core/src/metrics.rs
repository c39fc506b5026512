//! Weighted MRR and single-relevant-item NDCG@p, plus the slice report that
//! splits samples by whether the user had past searches.
//!
//! Each sample has exactly one relevant query (the one the user submitted),
//! so the ideal DCG is 1 and NDCG@p reduces to the discount of the hit
//! position when it falls within the top p. A missing target contributes 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::features::{ContextState, DEFAULT_PAST_K};
use crate::rank::{RankRequest, Ranker};
use crate::session::PastQuery;
use crate::text::match_key;
use crate::{Error, Result};

/// `1 / log2(rank + 1)`, the gain of a single relevant item at a 1-based
/// rank. Shared with the pairwise loss.
pub fn position_discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub ranked_list: Vec<String>,
    pub target_query: String,
    pub weight: f64,
    pub context_present: bool,
}

/// 1-based position of `target` (normalized equality).
pub fn hit_rank<S: AsRef<str>>(ranked_list: &[S], target: &str) -> Option<usize> {
    let key = match_key(target);
    ranked_list
        .iter()
        .position(|q| match_key(q.as_ref()) == key)
        .map(|i| i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MrrNormalization {
    /// Σ w / hitRank ÷ Σ w.
    #[default]
    WeightedMean,
    /// Σ w / hitRank ÷ |S|.
    PerSample,
}

fn total_weight(samples: &[EvalSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let total: f64 = samples.iter().map(|s| s.weight).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(total)
}

pub fn mrr(samples: &[EvalSample], normalization: MrrNormalization) -> Result<f64> {
    let total = total_weight(samples)?;
    let sum: f64 = samples
        .iter()
        .map(|s| {
            hit_rank(&s.ranked_list, &s.target_query).map_or(0.0, |r| s.weight / r as f64)
        })
        .sum();
    Ok(match normalization {
        MrrNormalization::WeightedMean => sum / total,
        MrrNormalization::PerSample => sum / samples.len() as f64,
    })
}

pub fn ndcg_at_p(samples: &[EvalSample], p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidConfig("NDCG cutoff p must be at least 1".into()));
    }
    let total = total_weight(samples)?;
    let sum: f64 = samples
        .iter()
        .map(|s| match hit_rank(&s.ranked_list, &s.target_query) {
            Some(r) if r <= p => s.weight * position_discount(r),
            _ => 0.0,
        })
        .sum();
    Ok(sum / total)
}

/// One logged impression to be re-ranked: the displayed candidates, the
/// query the user went on to submit, the sample weight and the user's past
/// searches. Stored one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub session_id: String,
    pub prefix: String,
    pub candidates: Vec<String>,
    pub target: String,
    pub weight: f64,
    #[serde(default)]
    pub context: Vec<PastQuery>,
}

impl EvalQuery {
    pub fn context_present(&self) -> bool {
        !self.context.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceMetrics {
    pub count: usize,
    /// `None` when the slice is empty or carries no weight.
    pub mrr: Option<f64>,
    pub ndcg_at_1: Option<f64>,
    pub ndcg_at_3: Option<f64>,
}

impl SliceMetrics {
    pub fn compute(samples: &[EvalSample]) -> Self {
        SliceMetrics {
            count: samples.len(),
            mrr: mrr(samples, MrrNormalization::WeightedMean).ok(),
            ndcg_at_1: ndcg_at_p(samples, 1).ok(),
            ndcg_at_3: ndcg_at_p(samples, 3).ok(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ranker: String,
    /// All samples (AS).
    pub all: SliceMetrics,
    /// Samples with past searches (SWPS).
    pub with_past: SliceMetrics,
    /// Samples without past searches (SWOPS).
    pub without_past: SliceMetrics,
    pub errors: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub error_examples: Vec<String>,
}

/// Re-ranks every query with `ranker` and scores the three slices.
/// Queries the ranker fails on are tallied and left out of every slice.
pub fn evaluate(ranker: &dyn Ranker, queries: &[EvalQuery]) -> EvalReport {
    evaluate_with_k(ranker, queries, DEFAULT_PAST_K)
}

pub fn evaluate_with_k(ranker: &dyn Ranker, queries: &[EvalQuery], past_k: usize) -> EvalReport {
    let mut samples = Vec::with_capacity(queries.len());
    let mut errors = 0;
    let mut error_examples = Vec::new();
    for q in queries {
        let ctx = ContextState::from_history(&q.context, past_k);
        let request = RankRequest {
            prefix: &q.prefix,
            candidates: &q.candidates,
            context: &ctx,
        };
        match ranker.rank(&request) {
            Ok(list) => samples.push(EvalSample {
                ranked_list: list.items.into_iter().map(|s| s.query).collect(),
                target_query: q.target.clone(),
                weight: q.weight,
                context_present: q.context_present(),
            }),
            Err(e) => {
                errors += 1;
                if error_examples.len() < 5 {
                    error_examples.push(format!("{}: {e}", q.session_id));
                }
            }
        }
    }
    let (with, without): (Vec<EvalSample>, Vec<EvalSample>) =
        samples.iter().cloned().partition(|s| s.context_present);
    EvalReport {
        ranker: ranker.id().to_string(),
        all: SliceMetrics::compute(&samples),
        with_past: SliceMetrics::compute(&with),
        without_past: SliceMetrics::compute(&without),
        errors,
        error_examples,
    }
}

fn cell(value: Option<f64>, base: Option<f64>, is_base: bool) -> String {
    match (value, base) {
        (None, _) => "n/a".to_string(),
        (Some(v), Some(b)) if !is_base && b > 0.0 => {
            format!("{v:.3}({:+.2}%)", (v - b) / b * 100.0)
        }
        (Some(v), _) => format!("{v:.3}"),
    }
}

/// Plain-text tables, one per slice, with percent deltas against the
/// baseline ranker's row.
pub fn render_tables(reports: &[EvalReport], baseline: &str) -> String {
    type Pick = fn(&EvalReport) -> &SliceMetrics;
    let slices: [(&str, Pick); 3] = [
        ("All Samples (AS)", |r| &r.all),
        ("Samples Without Past Searches (SWOPS)", |r| &r.without_past),
        ("Samples With Past Searches (SWPS)", |r| &r.with_past),
    ];
    let base = reports.iter().find(|r| r.ranker == baseline);
    let name_w = reports
        .iter()
        .map(|r| r.ranker.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut out = String::new();
    for (title, pick) in slices {
        let count = reports.first().map_or(0, |r| pick(r).count);
        let _ = writeln!(out, "{title}  [n={count}, baseline={baseline}]");
        let _ = writeln!(
            out,
            "{:<name_w$} | {:>16} | {:>16} | {:>16}",
            "Model", "MRR", "NDCG@1", "NDCG@3"
        );
        let _ = writeln!(out, "{}", "-".repeat(name_w + 57));
        for r in reports {
            let m = pick(r);
            let b = base.map(pick);
            let is_base = r.ranker == baseline;
            let _ = writeln!(
                out,
                "{:<name_w$} | {:>16} | {:>16} | {:>16}",
                r.ranker,
                cell(m.mrr, b.and_then(|b| b.mrr), is_base),
                cell(m.ndcg_at_1, b.and_then(|b| b.ndcg_at_1), is_base),
                cell(m.ndcg_at_3, b.and_then(|b| b.ndcg_at_3), is_base),
            );
        }
        if reports.iter().any(|r| pick(r).is_empty()) {
            let _ = writeln!(out, "(slice is empty)");
        }
        out.push('\n');
    }
    out
}
