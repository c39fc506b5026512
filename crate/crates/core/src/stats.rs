//! Per-query behavioral statistics: daily popularity and GMV series and
//! their exponentially decayed aggregates.
//!
//! Series are ordered oldest day first; the last entry is the most recent
//! day (age 0).

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::text::match_key;
use crate::{Error, Result};

pub const DEFAULT_SERIES_DAYS: usize = 7;
pub const DEFAULT_HALF_LIFE_DAYS: f64 = 7.0;
pub const DAY_MS: i64 = 86_400_000;

/// `Σ_d value_d · 2^(-age_d / half_life)` with the last element at age 0.
pub fn decayed_aggregate(daily_values: &[f64], half_life_days: f64) -> f64 {
    assert!(half_life_days > 0.0, "half-life must be positive");
    let n = daily_values.len();
    daily_values
        .iter()
        .enumerate()
        .map(|(i, v)| v * (-((n - 1 - i) as f64) / half_life_days).exp2())
        .sum()
}

/// One line of the stats file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRecord {
    pub query: String,
    pub daily_counts: Vec<f64>,
    pub daily_gmv: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorStats {
    pub daily_counts: Vec<f64>,
    pub daily_gmv: Vec<f64>,
    pub decayed_popularity: f64,
    pub decayed_gmv: f64,
}

impl BehaviorStats {
    /// A cold query: zero series and zero aggregates.
    pub fn cold(days: usize) -> Self {
        BehaviorStats {
            daily_counts: vec![0.0; days],
            daily_gmv: vec![0.0; days],
            decayed_popularity: 0.0,
            decayed_gmv: 0.0,
        }
    }
}

/// Fits a series to exactly `days` entries: keeps the most recent days and
/// left-pads with zeros.
fn fit_series(values: &[f64], days: usize) -> Vec<f64> {
    let tail = &values[values.len().saturating_sub(days)..];
    let mut out = vec![0.0; days - tail.len()];
    out.extend_from_slice(tail);
    out
}

/// Immutable lookup of behavioral stats keyed by normalized query.
#[derive(Debug, Clone)]
pub struct StatsStore {
    days: usize,
    half_life_days: f64,
    entries: HashMap<String, BehaviorStats>,
}

impl StatsStore {
    /// Builds the store; records for the same query are summed.
    pub fn from_records<I>(records: I, days: usize, half_life_days: f64) -> Result<Self>
    where
        I: IntoIterator<Item = StatsRecord>,
    {
        if days == 0 || half_life_days <= 0.0 {
            return Err(Error::InvalidConfig(
                "stats need positive days and half-life".into(),
            ));
        }
        let mut merged: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for rec in records {
            if rec
                .daily_counts
                .iter()
                .chain(&rec.daily_gmv)
                .any(|v| !v.is_finite() || *v < 0.0)
            {
                return Err(Error::InvalidConfig(format!(
                    "stats for '{}' contain negative or non-finite values",
                    rec.query
                )));
            }
            let counts = fit_series(&rec.daily_counts, days);
            let gmv = fit_series(&rec.daily_gmv, days);
            let entry = merged
                .entry(match_key(&rec.query))
                .or_insert_with(|| (vec![0.0; days], vec![0.0; days]));
            entry.0.iter_mut().zip(&counts).for_each(|(a, b)| *a += b);
            entry.1.iter_mut().zip(&gmv).for_each(|(a, b)| *a += b);
        }
        let entries = merged
            .into_iter()
            .map(|(k, (counts, gmv))| {
                let stats = BehaviorStats {
                    decayed_popularity: decayed_aggregate(&counts, half_life_days),
                    decayed_gmv: decayed_aggregate(&gmv, half_life_days),
                    daily_counts: counts,
                    daily_gmv: gmv,
                };
                (k, stats)
            })
            .collect();
        Ok(StatsStore {
            days,
            half_life_days,
            entries,
        })
    }

    pub fn empty(days: usize, half_life_days: f64) -> Self {
        Self::from_records(std::iter::empty(), days, half_life_days).expect("valid parameters")
    }

    pub fn days(&self) -> usize {
        self.days
    }

    pub fn half_life_days(&self) -> f64 {
        self.half_life_days
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, query: &str) -> Option<&BehaviorStats> {
        self.entries.get(&match_key(query))
    }

    /// Stats for a query, or the cold default.
    pub fn get(&self, query: &str) -> BehaviorStats {
        self.lookup(query)
            .cloned()
            .unwrap_or_else(|| BehaviorStats::cold(self.days))
    }

    pub fn decayed_popularity(&self, query: &str) -> f64 {
        self.lookup(query).map_or(0.0, |s| s.decayed_popularity)
    }

    /// Sorted by query for stable output.
    pub fn records(&self) -> Vec<StatsRecord> {
        let mut out: Vec<StatsRecord> = self
            .entries
            .iter()
            .map(|(q, s)| StatsRecord {
                query: q.clone(),
                daily_counts: s.daily_counts.clone(),
                daily_gmv: s.daily_gmv.clone(),
            })
            .collect();
        out.sort_by(|a, b| a.query.cmp(&b.query));
        out
    }

    pub fn load<R: BufRead>(reader: R, days: usize, half_life_days: f64) -> Result<Self> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: StatsRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Self::from_records(records, days, half_life_days)
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Accumulates daily search counts and GMV from timestamped events, then
/// freezes them into series ending at a reference day.
#[derive(Debug, Default)]
pub struct StatsBuilder {
    counts: HashMap<String, BTreeMap<i64, f64>>,
    gmv: HashMap<String, BTreeMap<i64, f64>>,
    last_day: Option<i64>,
}

impl StatsBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn touch(&mut self, day: i64) {
        self.last_day = Some(self.last_day.map_or(day, |d| d.max(day)));
    }

    pub fn add_search(&mut self, query: &str, ts_ms: i64) {
        let day = ts_ms.div_euclid(DAY_MS);
        self.touch(day);
        *self
            .counts
            .entry(match_key(query))
            .or_default()
            .entry(day)
            .or_default() += 1.0;
    }

    pub fn add_gmv(&mut self, query: &str, ts_ms: i64, gmv: f64) {
        let day = ts_ms.div_euclid(DAY_MS);
        self.touch(day);
        *self
            .gmv
            .entry(match_key(query))
            .or_default()
            .entry(day)
            .or_default() += gmv;
    }

    /// Series cover the `days` days ending at `end_day` (defaults to the
    /// latest day seen).
    pub fn build(&self, days: usize, end_day: Option<i64>) -> Vec<StatsRecord> {
        let Some(end) = end_day.or(self.last_day) else {
            return Vec::new();
        };
        let start = end - days as i64 + 1;
        let series = |m: Option<&BTreeMap<i64, f64>>| -> Vec<f64> {
            (start..=end)
                .map(|d| m.and_then(|m| m.get(&d)).copied().unwrap_or(0.0))
                .collect()
        };
        let mut queries: Vec<&String> = self.counts.keys().chain(self.gmv.keys()).collect();
        queries.sort();
        queries.dedup();
        queries
            .into_iter()
            .map(|q| StatsRecord {
                query: q.clone(),
                daily_counts: series(self.counts.get(q)),
                daily_gmv: series(self.gmv.get(q)),
            })
            .filter(|r| r.daily_counts.iter().chain(&r.daily_gmv).any(|&v| v > 0.0))
            .collect()
    }
}
