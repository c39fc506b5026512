use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::{Error, Result};

/// Draws negative token indices from the unigram distribution raised to a
/// power, in O(1) per draw.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    alias: WeightedAliasIndex<f64>,
    probabilities: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(frequencies: &[u64], power: f64) -> Result<Self> {
        if !(power > 0.0 && power <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "unigram power {power} outside (0, 1]"
            )));
        }
        if frequencies.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let weights: Vec<f64> = frequencies.iter().map(|&f| (f as f64).powf(power)).collect();
        let total: f64 = weights.iter().sum();
        let probabilities = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(weights)
            .map_err(|e| Error::InvalidConfig(format!("negative sampler: {e}")))?;
        Ok(NegativeSampler {
            alias,
            probabilities,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.alias.sample(rng)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }
}
