//! Synthetic autocomplete traffic with known structure.
//!
//! Queries belong to one of two topical clusters (home storage vs. apparel)
//! whose members share leading characters, so short prefixes mix both. Each
//! query has a hidden base popularity, a daily growth trend and a value per
//! purchase. A user in a session has a latent topical mission; the query
//! they intend to search for is drawn with probability proportional to
//! `exp(u)`, where
//!
//! ```text
//! u = popularity·ln(today's rate) + trend·growth + value·ln(value)
//!     + same_cluster·[query in the mission cluster]
//! ```
//!
//! Past searches (from the mission cluster) are attached to a fraction of
//! sessions, so the context signal is visible only there. The user then
//! types the intended query one character at a time; every keystroke shows
//! the ten most popular completions by decayed popularity. When the intended
//! query is shown at rank `r` it is clicked with probability `r^-bias`; with
//! a position bias the user may instead click some other shown item, chosen
//! with probability proportional to `r^-bias · exp(u)`.
//!
//! Alongside the sessions the generator emits the 7-day behavior stats the
//! popularity baseline sees and a search stream for embedding training in
//! which consecutive searches stay within one cluster.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::session::{AcSession, Impression, PastQuery, MAX_DISPLAY_DEPTH};
use crate::stats::{StatsRecord, StatsStore, DAY_MS, DEFAULT_HALF_LIFE_DAYS, DEFAULT_SERIES_DAYS};
use crate::trie::PrefixTrie;
use crate::{Error, Result};

const HOME: &[&str] = &[
    "hangers", "hamper", "hand towels", "hooks", "hanging shelves", "closet organizer",
    "closet rod", "clothes rack", "shoe rack", "shelf liner", "storage bins", "storage boxes",
    "laundry basket", "lint roller", "bath mat", "blanket", "broom", "candles", "curtains",
    "drawer dividers", "duvet cover", "mirror", "pillows", "rug", "towels", "vacuum",
    "wardrobe", "wall hooks", "bed sheets", "coat rack",
];

const APPAREL: &[&str] = &[
    "hats", "handbag", "hair clips", "hoodie", "heels", "cardigan", "coat", "scarf",
    "sandals", "shirt", "shorts", "skirt", "socks", "sneakers", "boots", "belt", "bracelet",
    "dress", "denim jacket", "earrings", "jeans", "leggings", "necklace", "pajamas", "purse",
    "wallet", "watch", "sweater", "blouse", "cap",
];

const MODIFIERS: &[&str] = &[
    "", " for women", " for men", " black", " set", " large", " kids", " white", " velvet",
    " small",
];

/// Weights of the hidden relevance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceWeights {
    pub popularity: f64,
    pub trend: f64,
    pub value: f64,
    pub same_cluster: f64,
}

impl Default for RelevanceWeights {
    fn default() -> Self {
        RelevanceWeights {
            popularity: 1.0,
            trend: 3.0,
            value: 0.5,
            same_cluster: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub sessions: usize,
    pub queries_per_cluster: usize,
    pub days: usize,
    pub half_life_days: f64,
    /// Fraction of sessions that carry past searches.
    pub context_rate: f64,
    pub max_past_queries: usize,
    /// Mean daily searches of a median query.
    pub base_popularity: f64,
    pub popularity_spread: f64,
    /// Standard deviation of the per-day log growth rate.
    pub trend_spread: f64,
    pub purchase_rate: f64,
    /// Exponent of the `rank^-bias` examination curve; 0 disables position
    /// effects.
    pub position_bias: f64,
    /// Per-impression chance of a biased click on something other than the
    /// intended query (only with `position_bias > 0`).
    pub distraction: f64,
    pub relevance: RelevanceWeights,
    pub search_users: usize,
    pub search_sessions_per_user: usize,
    /// Unix day of the first stats day; sessions happen the day after the
    /// stats window.
    pub start_day: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            sessions: 4000,
            queries_per_cluster: 60,
            days: DEFAULT_SERIES_DAYS,
            half_life_days: DEFAULT_HALF_LIFE_DAYS,
            context_rate: 0.5,
            max_past_queries: 3,
            base_popularity: 40.0,
            popularity_spread: 1.0,
            trend_spread: 0.15,
            purchase_rate: 0.8,
            position_bias: 0.0,
            distraction: 0.0,
            relevance: RelevanceWeights::default(),
            search_users: 400,
            search_sessions_per_user: 4,
            start_day: 20_000,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.queries_per_cluster == 0 || self.queries_per_cluster > HOME.len() * MODIFIERS.len() {
            return bad("queries_per_cluster must lie in 1..=300");
        }
        if self.days == 0 || self.half_life_days <= 0.0 {
            return bad("days and half_life_days must be positive");
        }
        for (name, v) in [
            ("context_rate", self.context_rate),
            ("purchase_rate", self.purchase_rate),
            ("distraction", self.distraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.position_bias < 0.0 || self.base_popularity <= 0.0 {
            return bad("position_bias must be nonnegative and base_popularity positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthQuery {
    pub text: String,
    pub cluster: usize,
    /// Expected searches on the last stats day.
    pub base_rate: f64,
    /// Daily log growth.
    pub trend: f64,
    pub value: f64,
}

impl SynthQuery {
    fn rate_today(&self) -> f64 {
        self.base_rate * self.trend.exp()
    }
}

/// One search in the embedding stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchEvent {
    pub ts: i64,
    pub query: String,
    pub user: String,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub queries: Vec<SynthQuery>,
    pub stats: Vec<StatsRecord>,
    pub sessions: Vec<AcSession>,
    pub searches: Vec<SearchEvent>,
}

fn vocabulary(per_cluster: usize) -> Vec<(String, usize)> {
    let mut out = Vec::with_capacity(2 * per_cluster);
    for (cluster, heads) in [HOME, APPAREL].into_iter().enumerate() {
        let mut n = 0;
        'fill: for m in MODIFIERS {
            for h in heads {
                if n == per_cluster {
                    break 'fill;
                }
                out.push((format!("{h}{m}"), cluster));
                n += 1;
            }
        }
    }
    out
}

fn alias(weights: &[f64]) -> WeightedAliasIndex<f64> {
    WeightedAliasIndex::new(weights.to_vec()).expect("positive finite weights")
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spread = LogNormal::new(cfg.base_popularity.ln(), cfg.popularity_spread)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let trend = Normal::new(0.0, cfg.trend_spread).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let price = LogNormal::new(3.0, 0.6).expect("valid");
    let basket = LogNormal::new(0.0, 0.3).expect("valid");

    let queries: Vec<SynthQuery> = vocabulary(cfg.queries_per_cluster)
        .into_iter()
        .map(|(text, cluster)| SynthQuery {
            text,
            cluster,
            base_rate: spread.sample(&mut rng),
            trend: trend.sample(&mut rng),
            value: price.sample(&mut rng),
        })
        .collect();

    // observed behavior over the stats window
    let stats: Vec<StatsRecord> = queries
        .iter()
        .map(|q| {
            let counts: Vec<f64> = (0..cfg.days)
                .map(|d| {
                    let rate = q.base_rate * (q.trend * (d as f64 + 1.0 - cfg.days as f64)).exp();
                    Poisson::new(rate.max(1e-9)).expect("positive rate").sample(&mut rng).round()
                })
                .collect();
            let gmv = counts
                .iter()
                .map(|c| (c * cfg.purchase_rate * q.value * 100.0).round() / 100.0)
                .collect();
            StatsRecord {
                query: q.text.clone(),
                daily_counts: counts,
                daily_gmv: gmv,
            }
        })
        .collect();
    let store = StatsStore::from_records(stats.clone(), cfg.days, cfg.half_life_days)?;
    let trie = PrefixTrie::build(
        queries.iter().map(|q| (q.text.as_str(), store.decayed_popularity(&q.text))),
        Some(MAX_DISPLAY_DEPTH),
    );
    let index_of: std::collections::HashMap<&str, usize> =
        queries.iter().enumerate().map(|(i, q)| (q.text.as_str(), i)).collect();

    let w = &cfg.relevance;
    let base_u: Vec<f64> = queries
        .iter()
        .map(|q| w.popularity * q.rate_today().ln() + w.trend * q.trend + w.value * q.value.ln())
        .collect();
    let utility = |i: usize, mission: usize| {
        base_u[i] + if queries[i].cluster == mission { w.same_cluster } else { 0.0 }
    };
    let intent: Vec<WeightedAliasIndex<f64>> = (0..2)
        .map(|m| {
            let u: Vec<f64> = (0..queries.len()).map(|i| utility(i, m)).collect();
            let top = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            alias(&u.iter().map(|x| (x - top).exp()).collect::<Vec<_>>())
        })
        .collect();
    let by_cluster: Vec<Vec<usize>> = (0..2)
        .map(|c| (0..queries.len()).filter(|&i| queries[i].cluster == c).collect())
        .collect();
    let cluster_pop: Vec<WeightedAliasIndex<f64>> = by_cluster
        .iter()
        .map(|ids| alias(&ids.iter().map(|&i| queries[i].base_rate).collect::<Vec<_>>()))
        .collect();

    let session_day_ms = (cfg.start_day + cfg.days as i64) * DAY_MS;
    let mut sessions = Vec::with_capacity(cfg.sessions);
    for s in 0..cfg.sessions {
        let mission = rng.random_range(0..2usize);
        let ts = session_day_ms + rng.random_range(3_600_000..DAY_MS - 3_600_000);
        let mut past_queries = Vec::new();
        if rng.random::<f64>() < cfg.context_rate {
            let n = rng.random_range(1..=cfg.max_past_queries.max(1));
            for k in 0..n {
                let q = by_cluster[mission][cluster_pop[mission].sample(&mut rng)];
                let age = (k as i64 + 1) * rng.random_range(30_000..300_000);
                past_queries.push(PastQuery(queries[q].text.clone(), ts - age));
            }
        }
        let target = intent[mission].sample(&mut rng);
        let text = &queries[target].text;
        let mut impressions = Vec::new();
        let mut submitted = None;
        let chars: Vec<char> = text.chars().collect();
        for l in 1..=chars.len() {
            let prefix: String = chars[..l].iter().collect();
            let shown: Vec<String> = trie.lookup(&prefix).into_iter().map(str::to_string).collect();
            if shown.is_empty() {
                continue;
            }
            let examine = |r: usize| (r as f64).powf(-cfg.position_bias);
            let pos = shown.iter().position(|c| c == text);
            impressions.push(Impression {
                prefix,
                candidates: shown.clone(),
            });
            if cfg.position_bias > 0.0 && rng.random::<f64>() < cfg.distraction {
                let weights: Vec<f64> = shown
                    .iter()
                    .enumerate()
                    .map(|(r, c)| examine(r + 1) * utility(index_of[c.as_str()], mission).exp())
                    .collect();
                let pick = alias(&weights).sample(&mut rng);
                submitted = Some(shown[pick].clone());
                break;
            }
            if let Some(r) = pos {
                if rng.random::<f64>() < examine(r + 1) {
                    submitted = Some(text.clone());
                    break;
                }
            }
        }
        let submitted = submitted.unwrap_or_else(|| text.clone());
        let gmv = if rng.random::<f64>() < cfg.purchase_rate {
            let v = queries[index_of[submitted.as_str()]].value * basket.sample(&mut rng);
            (v * 100.0).round() / 100.0
        } else {
            0.0
        };
        sessions.push(AcSession {
            session_id: format!("s{s:06}"),
            user_id: format!("u{:05}", rng.random_range(0..cfg.sessions.max(1) as u32)),
            timestamp: ts,
            past_queries,
            impressions,
            submitted_query: submitted,
            gmv,
        });
    }

    // search stream: runs of same-cluster searches separated by long gaps
    let mut searches = Vec::new();
    let stream_start = cfg.start_day * DAY_MS;
    for u in 0..cfg.search_users {
        let user = format!("u{u:05}");
        let mut ts = stream_start + rng.random_range(0..3_600_000);
        for _ in 0..cfg.search_sessions_per_user {
            let c = rng.random_range(0..2usize);
            let n = rng.random_range(3..=8);
            for _ in 0..n {
                let q = by_cluster[c][cluster_pop[c].sample(&mut rng)];
                searches.push(SearchEvent {
                    ts,
                    query: queries[q].text.clone(),
                    user: user.clone(),
                });
                ts += rng.random_range(20_000..180_000);
            }
            ts += rng.random_range(1_800_000..7_200_000);
        }
    }
    searches.sort_by(|a, b| (a.ts, &a.user).cmp(&(b.ts, &b.user)));

    Ok(SynthData {
        queries,
        stats,
        sessions,
        searches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::label_impressions;

    fn small() -> SynthConfig {
        SynthConfig {
            sessions: 300,
            queries_per_cluster: 30,
            search_users: 20,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_and_well_formed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.sessions, b.sessions);
        assert_eq!(a.stats, b.stats);
        assert_eq!(a.queries.len(), 60);
        let with_ctx = a.sessions.iter().filter(|s| !s.past_queries.is_empty()).count();
        assert!((100..200).contains(&with_ctx), "{with_ctx}");
        for s in &a.sessions {
            assert!(s.impressions.iter().all(|i| i.candidates.len() <= MAX_DISPLAY_DEPTH));
            let labeled = label_impressions(s);
            assert!(labeled.iter().any(|l| l.positive_rank.is_some()), "{s:?}");
            // reparse through the log format
            let line = s.to_json_line();
            assert_eq!(crate::session::parse_session_line(&line).unwrap(), *s);
        }
        assert!(a.searches.windows(2).all(|w| w[0].ts <= w[1].ts));
    }

    #[test]
    fn short_prefixes_mix_clusters() {
        let d = generate(&small()).unwrap();
        let h: Vec<usize> = d
            .queries
            .iter()
            .filter(|q| q.text.starts_with('h'))
            .map(|q| q.cluster)
            .collect();
        assert!(h.contains(&0) && h.contains(&1));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = SynthConfig {
            context_rate: 1.5,
            ..small()
        };
        assert!(generate(&cfg).is_err());
    }
}
