//! Session log to training data: held-out evaluation impressions, training
//! and validation pairs, split by session.

use serde::{Deserialize, Serialize};

use crate::metrics::EvalQuery;
use crate::session::{extract_pairs, holdout_sessions, label_impressions, split_corpus, AcSession, TrainingPair, WeightMode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    /// Fraction of sessions held out for evaluation.
    pub test_fraction: f64,
    /// Fraction of the remaining sessions whose pairs form the validation set.
    pub validation_fraction: f64,
    pub weight_mode: WeightMode,
    /// Drop sessions without a purchase before anything else.
    pub gmv_positive_only: bool,
    pub seed: u64,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        PrepareConfig {
            test_fraction: 0.2,
            validation_fraction: 0.1,
            weight_mode: WeightMode::default(),
            gmv_positive_only: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PreparedData {
    pub train: Vec<TrainingPair>,
    pub validation: Vec<TrainingPair>,
    pub eval: Vec<EvalQuery>,
    pub sessions_used: usize,
    pub sessions_held_out: usize,
}

/// Every impression of `session` that shows the submitted query becomes
/// one evaluation sample.
pub fn eval_queries(session: &AcSession, mode: WeightMode) -> Vec<EvalQuery> {
    let weight = mode.weight(session.gmv);
    label_impressions(session)
        .into_iter()
        .filter_map(|l| {
            let rank = l.positive_rank?;
            Some(EvalQuery {
                session_id: session.session_id.clone(),
                target: l.impression.candidates[rank - 1].clone(),
                prefix: l.impression.prefix,
                candidates: l.impression.candidates,
                weight,
                context: session.past_queries.clone(),
            })
        })
        .collect()
}

pub fn prepare(sessions: &[AcSession], cfg: &PrepareConfig) -> Result<PreparedData> {
    for (name, f) in [
        ("test_fraction", cfg.test_fraction),
        ("validation_fraction", cfg.validation_fraction),
    ] {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
        }
    }
    let kept: Vec<&AcSession> = sessions
        .iter()
        .filter(|s| !cfg.gmv_positive_only || s.gmv > 0.0)
        .collect();
    let test = holdout_sessions(kept.iter().map(|s| s.session_id.as_str()), cfg.test_fraction, cfg.seed);
    let mut pairs = Vec::new();
    let mut eval = Vec::new();
    for s in &kept {
        if test.contains(&s.session_id) {
            eval.extend(eval_queries(s, cfg.weight_mode));
        } else {
            pairs.extend(extract_pairs(s, cfg.weight_mode));
        }
    }
    // a different stream than the test split so the two are independent
    let (train, validation) = split_corpus(pairs, cfg.validation_fraction, cfg.seed ^ 0x5eed_0f_7a11);
    Ok(PreparedData {
        train,
        validation,
        eval,
        sessions_used: kept.len(),
        sessions_held_out: test.len(),
    })
}
