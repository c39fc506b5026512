//! Per-session ring buffers of recent submissions with lazy TTL eviction.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use acrank_core::features::DEFAULT_PAST_K;
use acrank_core::session::PastQuery;

pub const DEFAULT_CONTEXT_TTL_MS: i64 = 30 * 60 * 1000;

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> i64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> i64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as i64)
            .unwrap_or(0)
    }
}

/// A clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicI64);

impl ManualClock {
    pub fn new(start_ms: i64) -> Self {
        ManualClock(AtomicI64::new(start_ms))
    }

    pub fn advance(&self, ms: i64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> i64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now_ms(&self) -> i64 {
        (**self).now_ms()
    }
}

pub struct ContextStore {
    capacity: usize,
    ttl_ms: i64,
    clock: Box<dyn Clock>,
    sessions: Mutex<HashMap<String, VecDeque<PastQuery>>>,
}

impl std::fmt::Debug for ContextStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContextStore")
            .field("capacity", &self.capacity)
            .field("ttl_ms", &self.ttl_ms)
            .finish_non_exhaustive()
    }
}

impl Default for ContextStore {
    fn default() -> Self {
        ContextStore::new(DEFAULT_PAST_K, DEFAULT_CONTEXT_TTL_MS, SystemClock)
    }
}

impl ContextStore {
    pub fn new(capacity: usize, ttl_ms: i64, clock: impl Clock + 'static) -> Self {
        ContextStore {
            capacity,
            ttl_ms,
            clock: Box::new(clock),
            sessions: Mutex::new(HashMap::new()),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn evict(buf: &mut VecDeque<PastQuery>, now: i64, ttl: i64) {
        while buf.front().is_some_and(|p| now - p.ts() > ttl) {
            buf.pop_front();
        }
    }

    pub fn record(&self, session_id: &str, query: &str) {
        let now = self.clock.now_ms();
        let mut sessions = self.sessions.lock().expect("context lock poisoned");
        let buf = sessions.entry(session_id.to_string()).or_default();
        Self::evict(buf, now, self.ttl_ms);
        buf.push_back(PastQuery(query.to_string(), now));
        while buf.len() > self.capacity {
            buf.pop_front();
        }
    }

    /// Live entries for a session, oldest first; empty for unknown ids.
    pub fn recent(&self, session_id: &str) -> Vec<PastQuery> {
        let now = self.clock.now_ms();
        let mut sessions = self.sessions.lock().expect("context lock poisoned");
        let Some(buf) = sessions.get_mut(session_id) else {
            return Vec::new();
        };
        Self::evict(buf, now, self.ttl_ms);
        let out = buf.iter().cloned().collect();
        if buf.is_empty() {
            sessions.remove(session_id);
        }
        out
    }
}
