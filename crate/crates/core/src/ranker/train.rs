//! Mini-batch training of the pairwise network with Adam.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{pair_loss_grad, pair_scale, softplus, LossConfig};
use super::network::{BackwardScratch, ForwardCache, Network, ScaledInput};
use crate::features::FeatureVector;
use crate::{Error, Result};

/// A featurized training pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub positive: FeatureVector,
    pub negative: FeatureVector,
    pub rank_p: usize,
    pub rank_n: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingHistory {
    /// Loss of the initial parameters on the training set, dropout off.
    pub initial_train_loss: f64,
    /// Mean mini-batch loss per epoch (dropout on).
    pub train_loss: Vec<f64>,
    /// Validation loss per epoch, dropout off; empty when there is no
    /// validation set.
    pub val_loss: Vec<f64>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
}

/// Precomputed per-pair inputs.
#[derive(Debug, Clone)]
pub struct PreparedPair {
    positive: ScaledInput,
    negative: ScaledInput,
    scale: f64,
}

pub fn prepare_pairs(
    net: &Network,
    pairs: &[PairExample],
    loss: &LossConfig,
) -> Result<Vec<PreparedPair>> {
    pairs
        .iter()
        .map(|p| {
            if !(p.weight >= 0.0 && p.weight.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "pair weight must be finite and nonnegative, got {}",
                    p.weight
                )));
            }
            Ok(PreparedPair {
                positive: net.scale(&p.positive)?,
                negative: net.scale(&p.negative)?,
                scale: pair_scale(p.rank_p, p.rank_n, p.weight, loss)?,
            })
        })
        .collect()
}

/// Reusable buffers for one worker.
#[derive(Debug, Default)]
pub struct Workspace {
    pos: ForwardCache,
    neg: ForwardCache,
    scratch: BackwardScratch,
}

/// Mean loss over `pairs`; when `grads` is given the mean gradient is
/// added into it. Both branches run through the same parameters, so their
/// gradients accumulate into the same slots.
pub fn batch_loss_and_grad<R: Rng + ?Sized>(
    net: &Network,
    pairs: &[PreparedPair],
    mut grads: Option<&mut [f64]>,
    training: bool,
    rng: &mut R,
    ws: &mut Workspace,
) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let inv = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    for pair in pairs {
        ws.pos.load(&pair.positive);
        ws.neg.load(&pair.negative);
        let f_p = net.forward_cached(&mut ws.pos, training, rng);
        let f_n = net.forward_cached(&mut ws.neg, training, rng);
        total += softplus(f_n - f_p) * pair.scale;
        if let Some(g) = grads.as_deref_mut() {
            let (d_p, d_n) = pair_loss_grad(f_p, f_n, pair.scale);
            net.backward(&ws.pos, d_p * inv, g, &mut ws.scratch);
            net.backward(&ws.neg, d_n * inv, g, &mut ws.scratch);
        }
    }
    total * inv
}

/// Mean loss of featurized pairs with dropout off.
pub fn mean_loss(net: &Network, pairs: &[PairExample], loss: &LossConfig) -> Result<f64> {
    let prepared = prepare_pairs(net, pairs, loss)?;
    Ok(eval_loss(net, &prepared))
}

fn eval_loss(net: &Network, prepared: &[PreparedPair]) -> f64 {
    let mut ws = Workspace::default();
    let mut sum = 0.0;
    for chunk in prepared.chunks(1024) {
        sum += batch_loss_and_grad(net, chunk, None, false, &mut super::network::NoRng, &mut ws)
            * chunk.len() as f64;
    }
    sum / prepared.len().max(1) as f64
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

/// Trains in place of `net` and returns the parameters of the epoch with
/// the lowest validation loss (the last epoch when `val` is empty).
pub fn train_network(
    mut net: Network,
    train: &[PairExample],
    val: &[PairExample],
    loss: &LossConfig,
    cfg: &TrainConfig,
) -> Result<(Network, TrainingHistory)> {
    if train.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 {
        return Err(Error::InvalidConfig(
            "batch_size and epochs must be positive".into(),
        ));
    }
    let train_p = prepare_pairs(&net, train, loss)?;
    let val_p = prepare_pairs(&net, val, loss)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_p.len()).collect();
    let mut adam = Adam::new(net.param_count());
    let mut grads = vec![0.0; net.param_count()];
    let mut ws = Workspace::default();
    let mut batch: Vec<PreparedPair> = Vec::with_capacity(cfg.batch_size);

    let mut history = TrainingHistory {
        initial_train_loss: eval_loss(&net, &train_p),
        ..Default::default()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut last_finite = history.initial_train_loss;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(idx.iter().map(|&i| train_p[i].clone()));
            grads.iter_mut().for_each(|g| *g = 0.0);
            let l = batch_loss_and_grad(&net, &batch, Some(&mut grads), true, &mut rng, &mut ws);
            if !l.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    last_finite,
                });
            }
            last_finite = l;
            epoch_sum += l * batch.len() as f64;
            adam.step(&mut net.params, &grads, cfg);
        }
        history.train_loss.push(epoch_sum / train_p.len() as f64);
        if !val_p.is_empty() {
            let v = eval_loss(&net, &val_p);
            history.val_loss.push(v);
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, net.params.clone()));
                history.best_epoch = epoch;
            }
        }
    }
    match best {
        Some((_, params)) => net.params = params,
        None => history.best_epoch = cfg.epochs,
    }
    Ok((net, history))
}
