//! Pairwise ranking loss.
//!
//! For a pair with positive score `f_p` and negative score `f_n`:
//!
//! ```text
//! P    = 1 / (1 + exp(-(f_p - f_n)))
//! loss = -log(P) · |1/log2(rank_p + 1) - 1/log2(rank_n + 1)| · w
//! ```
//!
//! The label is always 1 (the positive should outrank the negative), so
//! the binary cross-entropy collapses to `-log P`. The batch loss is the
//! mean over pairs.

use serde::{Deserialize, Serialize};

use crate::metrics::position_discount;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Scale each pair by |ΔNDCG| of swapping its two display positions.
    pub use_delta_ndcg: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            use_delta_ndcg: true,
        }
    }
}

/// Base of the logarithm in every discount.
pub const LOG_BASE: f64 = 2.0;

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Probability that the positive is ranked above the negative.
pub fn pair_probability(f_p: f64, f_n: f64) -> f64 {
    sigmoid(f_p - f_n)
}

/// |ΔNDCG| for swapping the items at two distinct 1-based ranks.
pub fn delta_ndcg(rank_p: usize, rank_n: usize) -> Result<f64> {
    if rank_p == rank_n {
        return Err(Error::DegeneratePair(rank_p));
    }
    if rank_p == 0 || rank_n == 0 {
        return Err(Error::InvalidConfig("ranks are 1-based".into()));
    }
    Ok((position_discount(rank_p) - position_discount(rank_n)).abs())
}

/// Weight multiplying the cross-entropy term of one pair.
pub fn pair_scale(rank_p: usize, rank_n: usize, w: f64, cfg: &LossConfig) -> Result<f64> {
    let delta = if cfg.use_delta_ndcg {
        delta_ndcg(rank_p, rank_n)?
    } else {
        1.0
    };
    Ok(delta * w)
}

pub fn pair_loss(
    f_p: f64,
    f_n: f64,
    rank_p: usize,
    rank_n: usize,
    w: f64,
    cfg: &LossConfig,
) -> Result<f64> {
    if w == 0.0 {
        return Ok(0.0);
    }
    // -log σ(f_p - f_n) = softplus(f_n - f_p)
    Ok(softplus(f_n - f_p) * pair_scale(rank_p, rank_n, w, cfg)?)
}

/// (∂loss/∂f_p, ∂loss/∂f_n) for a single pair, before the 1/|S| factor.
pub fn pair_loss_grad(f_p: f64, f_n: f64, scale: f64) -> (f64, f64) {
    let s = sigmoid(f_n - f_p) * scale;
    (-s, s)
}
