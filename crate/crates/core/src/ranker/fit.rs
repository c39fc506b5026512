//! End-to-end training from extracted pairs to a checkpoint.

use super::checkpoint::{Checkpoint, TrainingMetadata};
use super::loss::LossConfig;
use super::network::{Network, NetworkConfig};
use super::scaler::InputScaler;
use super::train::{train_network, PairExample, TrainConfig};
use crate::features::{ContextState, Featurizer};
use crate::session::TrainingPair;
use crate::{Error, Result};

pub fn featurize_pairs(pairs: &[TrainingPair], featurizer: &Featurizer<'_>) -> Result<Vec<PairExample>> {
    let k = featurizer.layout.past_k;
    pairs
        .iter()
        .map(|p| {
            let ctx = ContextState::from_history(&p.context, k);
            Ok(PairExample {
                positive: featurizer.featurize(&p.positive_query, &p.prefix, &ctx)?,
                negative: featurizer.featurize(&p.negative_query, &p.prefix, &ctx)?,
                rank_p: p.rank_p,
                rank_n: p.rank_n,
                weight: p.weight,
            })
        })
        .collect()
}

/// Network config with default widths for a feature layout.
pub fn network_config_for(featurizer: &Featurizer<'_>) -> NetworkConfig {
    let l = featurizer.layout;
    NetworkConfig::with_dims(l.dense_len(), l.series_len, l.context_len())
}

/// Featurizes, fits the input scaler on the training features, initializes
/// and trains. `net_cfg` block sizes must match the featurizer's layout.
pub fn train_ranker(
    train: &[TrainingPair],
    val: &[TrainingPair],
    featurizer: &Featurizer<'_>,
    net_cfg: NetworkConfig,
    train_cfg: &TrainConfig,
) -> Result<Checkpoint> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let train_x = featurize_pairs(train, featurizer)?;
    let val_x = featurize_pairs(val, featurizer)?;
    let all: Vec<_> = train_x.iter().flat_map(|p| [&p.positive, &p.negative]).collect();
    let scaler = InputScaler::fit(&all)?;
    let loss = LossConfig {
        use_delta_ndcg: !net_cfg.ablate_delta_ndcg,
    };
    let layout = featurizer.layout.clone();
    let net = Network::init(net_cfg, scaler)?;
    let (net, history) = train_network(net, &train_x, &val_x, &loss, train_cfg)?;
    Checkpoint::new(
        net,
        layout,
        TrainingMetadata {
            train: Some(train_cfg.clone()),
            history,
            train_pairs: train.len(),
            val_pairs: val.len(),
        },
    )
}
