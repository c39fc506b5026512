//! The pairwise neural ranker: a siamese scoring network shared by both
//! sides of a (positive, negative) pair, trained with a cross-entropy loss
//! scaled by the NDCG change of swapping the pair.

mod checkpoint;
mod fit;
mod loss;
mod network;
mod scaler;
mod score;
mod train;

pub use checkpoint::{Checkpoint, TrainingMetadata, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use fit::{featurize_pairs, network_config_for, train_ranker};
pub use loss::{
    delta_ndcg, pair_loss, pair_loss_grad, pair_probability, pair_scale, LossConfig, LOG_BASE,
};
pub use network::{
    BackwardScratch, ForwardCache, Network, NetworkConfig, ParamLayout, ScaledInput, TensorSpec,
};
pub use scaler::{BlockScaler, InputScaler, Transform};
pub use score::{default_ranker_id, score_candidates, NeuralRanker, NEURAL_ID};
pub use train::{
    batch_loss_and_grad, mean_loss, prepare_pairs, train_network, PairExample, PreparedPair,
    TrainConfig, TrainingHistory, Workspace,
};
