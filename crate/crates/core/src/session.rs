//! Autocomplete session logs: parsing, relevance labeling and pair extraction.
//!
//! A session is one keystroke-to-submission journey. Every impression shown
//! during the session is labeled against the query that was finally
//! submitted: that query is the positive wherever it appears, every other
//! displayed candidate is a negative. Pairs inherit the session's GMV as
//! their weight.

use std::collections::HashSet;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::text::match_key;
use crate::{Error, Result};

/// Candidates deeper than this are discarded at ingest.
pub const MAX_DISPLAY_DEPTH: usize = 10;

/// A past search: `[query, epoch_ms]` on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PastQuery(pub String, pub i64);

impl PastQuery {
    pub fn query(&self) -> &str {
        &self.0
    }

    pub fn ts(&self) -> i64 {
        self.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Impression {
    pub prefix: String,
    pub candidates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcSession {
    pub session_id: String,
    pub user_id: String,
    #[serde(rename = "ts")]
    pub timestamp: i64,
    #[serde(default)]
    pub past_queries: Vec<PastQuery>,
    pub impressions: Vec<Impression>,
    #[serde(rename = "submitted")]
    pub submitted_query: String,
    pub gmv: f64,
}

impl AcSession {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("session serializes")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImpression {
    pub impression: Impression,
    /// 1-based display rank of the submitted query, if shown.
    pub positive_rank: Option<usize>,
    pub negatives: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub session_id: String,
    pub prefix: String,
    pub positive_query: String,
    pub negative_query: String,
    pub rank_p: usize,
    pub rank_n: usize,
    pub weight: f64,
    pub context: Vec<PastQuery>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Gmv,
    Unit,
    #[default]
    Log1pGmv,
}

impl WeightMode {
    pub fn weight(self, gmv: f64) -> f64 {
        match self {
            WeightMode::Gmv => gmv,
            WeightMode::Unit => 1.0,
            WeightMode::Log1pGmv => 1.0 + gmv.ln_1p(),
        }
    }
}

impl std::str::FromStr for WeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gmv" => Ok(WeightMode::Gmv),
            "unit" => Ok(WeightMode::Unit),
            "log1p_gmv" | "log1p-gmv" => Ok(WeightMode::Log1pGmv),
            other => Err(format!("unknown weight mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMode {
    /// Abort on the first malformed line.
    Strict,
    /// Skip malformed lines and report them.
    SkipAndReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ParsedLog {
    pub sessions: Vec<AcSession>,
    pub errors: Vec<LineError>,
}

/// Parses and validates a single session record. Candidate lists are
/// truncated to [`MAX_DISPLAY_DEPTH`] and repeated candidates (same match
/// key) are dropped after their first occurrence.
pub fn parse_session_line(line: &str) -> Result<AcSession, String> {
    let mut session: AcSession = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if !session.gmv.is_finite() {
        return Err("non-finite gmv".into());
    }
    if session.gmv < 0.0 {
        return Err("negative gmv".into());
    }
    for (i, imp) in session.impressions.iter_mut().enumerate() {
        let mut seen = HashSet::new();
        imp.candidates.retain(|c| seen.insert(match_key(c)));
        imp.candidates.truncate(MAX_DISPLAY_DEPTH);
        if imp.candidates.is_empty() {
            return Err(format!("impression {i} has no candidates"));
        }
    }
    Ok(session)
}

/// Reads a line-per-session log. Blank lines are ignored; line numbers in
/// errors are 1-based.
pub fn parse_session_log<R: BufRead>(reader: R, mode: ParseMode) -> Result<ParsedLog> {
    let mut parsed = ParsedLog::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_session_line(&line) {
            Ok(session) => parsed.sessions.push(session),
            Err(message) => match mode {
                ParseMode::Strict => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message,
                    })
                }
                ParseMode::SkipAndReport => parsed.errors.push(LineError {
                    line: idx + 1,
                    message,
                }),
            },
        }
    }
    Ok(parsed)
}

pub fn label_impressions(session: &AcSession) -> Vec<LabeledImpression> {
    let target = match_key(&session.submitted_query);
    session
        .impressions
        .iter()
        .map(|imp| {
            let mut positive_rank = None;
            let mut negatives = Vec::with_capacity(imp.candidates.len());
            for (i, cand) in imp.candidates.iter().enumerate() {
                if positive_rank.is_none() && match_key(cand) == target {
                    positive_rank = Some(i + 1);
                } else {
                    negatives.push((cand.clone(), i + 1));
                }
            }
            LabeledImpression {
                impression: imp.clone(),
                positive_rank,
                negatives,
            }
        })
        .collect()
}

pub fn extract_pairs(session: &AcSession, mode: WeightMode) -> Vec<TrainingPair> {
    let weight = mode.weight(session.gmv);
    let mut pairs = Vec::new();
    for labeled in label_impressions(session) {
        let Some(rank_p) = labeled.positive_rank else {
            continue;
        };
        let positive = &labeled.impression.candidates[rank_p - 1];
        for (negative, rank_n) in &labeled.negatives {
            pairs.push(TrainingPair {
                session_id: session.session_id.clone(),
                prefix: labeled.impression.prefix.clone(),
                positive_query: positive.clone(),
                negative_query: negative.clone(),
                rank_p,
                rank_n: *rank_n,
                weight,
                context: session.past_queries.clone(),
            });
        }
    }
    pairs
}

/// Deterministic 64-bit hash of a session id under a seed (FNV-1a followed
/// by a splitmix finalizer).
pub fn session_hash(session_id: &str, seed: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for b in session_id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Picks `round(n * fraction)` of the distinct session ids, ordered by seeded
/// hash. Returns the held-out id set.
pub fn holdout_sessions<'a, I>(ids: I, fraction: f64, seed: u64) -> HashSet<String>
where
    I: IntoIterator<Item = &'a str>,
{
    assert!(
        (0.0..=1.0).contains(&fraction),
        "fraction must lie in [0, 1]"
    );
    let mut unique: Vec<&str> = ids.into_iter().collect::<HashSet<_>>().into_iter().collect();
    unique.sort_by(|a, b| {
        session_hash(a, seed)
            .cmp(&session_hash(b, seed))
            .then_with(|| a.cmp(b))
    });
    let take = (unique.len() as f64 * fraction).round() as usize;
    unique[..take].iter().map(|s| s.to_string()).collect()
}

/// Splits pairs into (train, validation) by session, so no session straddles
/// the two sides.
pub fn split_corpus(
    pairs: Vec<TrainingPair>,
    validation_fraction: f64,
    seed: u64,
) -> (Vec<TrainingPair>, Vec<TrainingPair>) {
    let held = holdout_sessions(
        pairs.iter().map(|p| p.session_id.as_str()),
        validation_fraction,
        seed,
    );
    pairs
        .into_iter()
        .partition(|p| !held.contains(&p.session_id))
}
