//! Candidate matching: a character trie over normalized queries with an
//! optional per-node shortlist of the most popular completions.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use crate::text::{match_key, prefix_key};
use crate::{Error, Result};

pub const DEFAULT_SHORTLIST: usize = 50;

#[derive(Debug, Default, Clone)]
struct Node {
    children: BTreeMap<char, u32>,
    terminal: Option<u32>,
    shortlist: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct PrefixTrie {
    nodes: Vec<Node>,
    queries: Vec<String>,
    popularity: Vec<f64>,
    shortlist_cap: Option<usize>,
}

impl PrefixTrie {
    /// Builds from `(query, popularity)` entries. Queries are keyed by their
    /// normalized form; repeats are merged and their popularity summed. With
    /// `shortlist_cap = None` no shortlists are kept and [`lookup`] returns
    /// every match.
    ///
    /// [`lookup`]: PrefixTrie::lookup
    pub fn build<I, S>(entries: I, shortlist_cap: Option<usize>) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: AsRef<str>,
    {
        let mut merged: BTreeMap<String, f64> = BTreeMap::new();
        for (q, pop) in entries {
            let key = match_key(q.as_ref());
            if key.is_empty() {
                continue;
            }
            *merged.entry(key).or_default() += pop;
        }
        let mut trie = PrefixTrie {
            nodes: vec![Node::default()],
            queries: Vec::with_capacity(merged.len()),
            popularity: Vec::with_capacity(merged.len()),
            shortlist_cap,
        };
        for (key, pop) in merged {
            let id = trie.queries.len() as u32;
            let mut node = 0usize;
            for ch in key.chars() {
                node = match trie.nodes[node].children.get(&ch) {
                    Some(&next) => next as usize,
                    None => {
                        let next = trie.nodes.len();
                        trie.nodes.push(Node::default());
                        trie.nodes[node].children.insert(ch, next as u32);
                        next
                    }
                };
            }
            trie.nodes[node].terminal = Some(id);
            trie.queries.push(key);
            trie.popularity.push(pop);
        }
        if let Some(cap) = shortlist_cap {
            trie.fill_shortlists(cap);
        }
        trie
    }

    /// Reads `query<TAB>popularity` lines (popularity optional, default 1).
    pub fn load_tsv<R: BufRead>(reader: R, shortlist_cap: Option<usize>) -> Result<Self> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let query = parts.next().unwrap_or_default().to_string();
            let pop = match parts.next() {
                Some(p) => p.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("bad popularity '{p}'"),
                })?,
                None => 1.0,
            };
            entries.push((query, pop));
        }
        Ok(Self::build(entries, shortlist_cap))
    }

    fn better(&self, a: u32, b: u32) -> std::cmp::Ordering {
        let (a, b) = (a as usize, b as usize);
        self.popularity[b]
            .total_cmp(&self.popularity[a])
            .then_with(|| self.queries[a].cmp(&self.queries[b]))
    }

    fn fill_shortlists(&mut self, cap: usize) {
        // children always have larger indices than their parent
        for n in (0..self.nodes.len()).rev() {
            let mut ids: Vec<u32> = self.nodes[n].terminal.into_iter().collect();
            for &c in self.nodes[n].children.values() {
                ids.extend_from_slice(&self.nodes[c as usize].shortlist);
            }
            ids.sort_by(|&a, &b| self.better(a, b));
            ids.truncate(cap);
            self.nodes[n].shortlist = ids;
        }
    }

    fn find(&self, prefix: &str) -> Option<usize> {
        let mut node = 0usize;
        for ch in prefix_key(prefix).chars() {
            node = *self.nodes[node].children.get(&ch)? as usize;
        }
        Some(node)
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn shortlist_cap(&self) -> Option<usize> {
        self.shortlist_cap
    }

    pub fn popularity(&self, query: &str) -> Option<f64> {
        let node = self.find(query)?;
        self.nodes[node].terminal.map(|id| self.popularity[id as usize])
    }

    /// Every stored query starting with `prefix`, in key order.
    pub fn lookup_all(&self, prefix: &str) -> Vec<&str> {
        let Some(start) = self.find(prefix) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if let Some(id) = node.terminal {
                out.push(self.queries[id as usize].as_str());
            }
            stack.extend(node.children.values().rev().map(|&c| c as usize));
        }
        out
    }

    /// Candidates for a prefix: the node's popularity shortlist when capped,
    /// otherwise all matches.
    pub fn lookup(&self, prefix: &str) -> Vec<&str> {
        match self.shortlist_cap {
            None => self.lookup_all(prefix),
            Some(_) => self.find(prefix).map_or_else(Vec::new, |n| {
                self.nodes[n]
                    .shortlist
                    .iter()
                    .map(|&id| self.queries[id as usize].as_str())
                    .collect()
            }),
        }
    }

    /// Popularity of every stored query, keyed by normalized form.
    pub fn popularity_map(&self) -> HashMap<&str, f64> {
        self.queries
            .iter()
            .map(String::as_str)
            .zip(self.popularity.iter().copied())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sorted(mut v: Vec<&str>) -> Vec<&str> {
        v.sort();
        v
    }

    #[test]
    fn lookup_examples() {
        let t = PrefixTrie::build([("hat", 3.0), ("hand", 2.0), ("hangers", 9.0)], None);
        assert_eq!(sorted(t.lookup("han")), ["hand", "hangers"]);
        assert_eq!(sorted(t.lookup("")), ["hand", "hangers", "hat"]);
        assert!(t.lookup("zz").is_empty());
        assert_eq!(t.lookup("HAN"), t.lookup("han"));
    }

    #[test]
    fn shortlist_by_popularity() {
        let t = PrefixTrie::build(
            [("hat", 3.0), ("hand", 2.0), ("hangers", 9.0), ("Hat ", 1.0), ("ham", 2.0)],
            Some(3),
        );
        assert_eq!(t.len(), 4);
        assert_eq!(t.popularity("hat"), Some(4.0));
        assert_eq!(t.lookup(""), ["hangers", "hat", "ham"]);
        assert_eq!(t.lookup("han"), ["hangers", "hand"]);
        assert!(t.lookup("q").is_empty());
    }

    #[test]
    fn multiword_prefix_keeps_trailing_space() {
        let t = PrefixTrie::build([("hand soap", 1.0), ("handbag", 1.0)], None);
        assert_eq!(t.lookup("hand "), ["hand soap"]);
        assert_eq!(sorted(t.lookup("Hand")), ["hand soap", "handbag"]);
    }

    proptest! {
        #[test]
        fn matches_brute_force(
            queries in prop::collection::vec("[abc]{1,5}( [ab]{1,2})?", 1..60),
            prefixes in prop::collection::vec("[abc ]{0,4}", 1..20),
            cap in 1usize..6,
        ) {
            let t = PrefixTrie::build(queries.iter().map(|q| (q.as_str(), 1.0)), None);
            let capped = PrefixTrie::build(queries.iter().map(|q| (q.as_str(), 1.0)), Some(cap));
            let mut keys: Vec<String> = queries.iter().map(|q| match_key(q)).collect();
            keys.sort();
            keys.dedup();
            for p in &prefixes {
                let pk = prefix_key(p);
                let expected: Vec<&str> = keys.iter().filter(|k| k.starts_with(&pk)).map(String::as_str).collect();
                prop_assert_eq!(t.lookup(p), expected.clone());
                let short = capped.lookup(p);
                prop_assert!(short.len() <= cap);
                prop_assert_eq!(short.len(), expected.len().min(cap));
                prop_assert!(short.iter().all(|q| expected.contains(q)));
            }
        }
    }
}
