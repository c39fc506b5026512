//! Whole-query embeddings.
//!
//! Each normalized query is one token; sessionized runs of queries are the
//! documents. Vectors are learned with skipgram and negative sampling, and
//! the trained table answers cosine-similarity lookups for the context
//! features.

mod io;
mod sampler;
mod skipgram;

use std::collections::HashMap;

pub use io::{load_embeddings, save_embeddings, SaveOptions};
pub use sampler::NegativeSampler;
pub use skipgram::{
    logistic_loss, logistic_loss_grad, sgns_example_grad, sgns_example_loss, train_skipgram,
    train_skipgram_monitored, SkipgramConfig,
};

use crate::text::{normalize_query, QueryToken};
use crate::{Error, Result};

/// Consecutive searches further apart than this start a new sequence.
pub const SESSION_GAP_MS: i64 = 10 * 60 * 1000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabEntry {
    pub index: usize,
    pub frequency: u64,
}

/// Documents of tokens plus the filtered vocabulary. Token indices follow
/// descending frequency, ties broken lexicographically.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Vec<usize>>,
    tokens: Vec<String>,
    vocabulary: HashMap<String, VocabEntry>,
}

impl Corpus {
    /// Counts tokens, drops those seen fewer than `min_count` times and
    /// re-indexes the documents.
    pub fn build(documents: &[Vec<QueryToken>], min_count: u64) -> Self {
        let mut counts: HashMap<&str, u64> = HashMap::new();
        for doc in documents {
            for tok in doc {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
        let mut kept: Vec<(&str, u64)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));

        let tokens: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
        let vocabulary: HashMap<String, VocabEntry> = kept
            .iter()
            .enumerate()
            .map(|(index, &(t, frequency))| (t.to_string(), VocabEntry { index, frequency }))
            .collect();
        let documents = documents
            .iter()
            .map(|doc| {
                doc.iter()
                    .filter_map(|t| vocabulary.get(t.as_str()).map(|e| e.index))
                    .collect::<Vec<_>>()
            })
            .filter(|doc| !doc.is_empty())
            .collect();
        Corpus {
            documents,
            tokens,
            vocabulary,
        }
    }

    pub fn documents(&self) -> &[Vec<usize>] {
        &self.documents
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vocabulary(&self) -> &HashMap<String, VocabEntry> {
        &self.vocabulary
    }

    pub fn frequencies(&self) -> Vec<u64> {
        self.tokens
            .iter()
            .map(|t| self.vocabulary[t].frequency)
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits a time-ordered search stream into runs whose consecutive gaps are
/// at most ten minutes. Queries that normalize to nothing are dropped first;
/// runs shorter than two queries carry no co-occurrence and are dropped too.
pub fn sessionize<S: AsRef<str>>(events: &[(S, i64)]) -> Vec<Vec<QueryToken>> {
    let mut out = Vec::new();
    let mut current: Vec<QueryToken> = Vec::new();
    let mut last_ts: Option<i64> = None;
    for (query, ts) in events {
        let Ok(token) = normalize_query(query.as_ref()) else {
            continue;
        };
        if let Some(prev) = last_ts {
            if ts - prev > SESSION_GAP_MS {
                if current.len() >= 2 {
                    out.push(std::mem::take(&mut current));
                } else {
                    current.clear();
                }
            }
        }
        current.push(token);
        last_ts = Some(*ts);
    }
    if current.len() >= 2 {
        out.push(current);
    }
    out
}

/// Sessionizes a multi-user stream of `(user, query, ts)`: events are
/// grouped per user (users in sorted order), ordered by time, then split
/// with [`sessionize`].
pub fn sessionize_by_user<U: AsRef<str>, S: AsRef<str>>(events: &[(U, S, i64)]) -> Vec<Vec<QueryToken>> {
    let mut per_user: std::collections::BTreeMap<&str, Vec<(&str, i64)>> = Default::default();
    for (user, query, ts) in events {
        per_user.entry(user.as_ref()).or_default().push((query.as_ref(), *ts));
    }
    per_user
        .into_values()
        .flat_map(|mut stream| {
            stream.sort_by_key(|e| e.1);
            sessionize(&stream)
        })
        .collect()
}

/// Cosine similarity. `defined` is false when either vector is all zeros,
/// in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub defined: bool,
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<Similarity> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(Similarity {
            value: 0.0,
            defined: false,
        });
    }
    let value = (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0);
    Ok(Similarity {
        value,
        defined: true,
    })
}

/// Trained query vectors. Rows of `target` are the vectors used for
/// similarity; `context` holds the output-side vectors when kept.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    target: Vec<f64>,
    context: Option<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(
        dim: usize,
        tokens: Vec<String>,
        target: Vec<f64>,
        context: Option<Vec<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("embedding dim must be positive".into()));
        }
        let rows = tokens.len();
        if target.len() != rows * dim {
            return Err(Error::DimensionMismatch {
                expected: rows * dim,
                actual: target.len(),
            });
        }
        if let Some(ctx) = &context {
            if ctx.len() != target.len() {
                return Err(Error::DimensionMismatch {
                    expected: target.len(),
                    actual: ctx.len(),
                });
            }
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Ok(EmbeddingTable {
            dim,
            tokens,
            index,
            target,
            context,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self::new(dim, Vec::new(), Vec::new(), None).expect("empty table is valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn target_vectors(&self) -> &[f64] {
        &self.target
    }

    pub fn context_vectors(&self) -> Option<&[f64]> {
        self.context.as_deref()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.target[index * self.dim..(index + 1) * self.dim]
    }

    pub fn token_vector(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.row(i))
    }

    /// Vector for a raw query string; `None` when out of vocabulary.
    pub fn query_vector(&self, query: &str) -> Option<&[f64]> {
        let token = normalize_query(query).ok()?;
        self.token_vector(token.as_str())
    }

    /// Similarity of two raw queries; OOV on either side yields an
    /// undefined similarity of 0.
    pub fn query_similarity(&self, a: &str, b: &str) -> Similarity {
        match (self.query_vector(a), self.query_vector(b)) {
            (Some(x), Some(y)) => cosine(x, y).expect("rows share the table dim"),
            _ => Similarity {
                value: 0.0,
                defined: false,
            },
        }
    }
}
