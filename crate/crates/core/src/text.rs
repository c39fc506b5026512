//! Query string normalization.
//!
//! Two forms are used across the crate. [`match_key`] is the light form used
//! for equality (labeling, metrics, stats lookups, trie keys): lowercase,
//! trimmed, internal whitespace collapsed to one space. [`normalize_query`]
//! produces the embedding token: special characters stripped and spaces
//! replaced by underscores so a whole query is a single "word".

use crate::{Error, Result};

/// Lowercase, trim and collapse internal whitespace.
pub fn match_key(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Like [`match_key`] but keeps a single trailing space, so that a typed
/// prefix "hand " still distinguishes "hand soap" from "handbag".
pub fn prefix_key(raw: &str) -> String {
    let mut key = match_key(raw);
    if !key.is_empty() && raw.ends_with(char::is_whitespace) {
        key.push(' ');
    }
    key
}

/// A whole query as a single embedding token: no spaces, nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueryToken(String);

impl QueryToken {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl std::fmt::Display for QueryToken {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_kept(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-' || c.is_whitespace()
}

/// Lowercase, drop everything except letters, digits, whitespace, `_` and
/// `-`, collapse whitespace and join the words with `_`.
pub fn normalize_query(raw: &str) -> Result<QueryToken> {
    let kept: String = raw
        .chars()
        .flat_map(char::to_lowercase)
        .filter(|&c| is_kept(c))
        .collect();
    let token = kept.split_whitespace().collect::<Vec<_>>().join("_");
    if token.is_empty() {
        Err(Error::EmptyAfterNormalization)
    } else {
        Ok(QueryToken(token))
    }
}
