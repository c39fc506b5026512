use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, EmbeddingTable, NegativeSampler};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SkipgramConfig {
    pub dim: usize,
    /// Context radius on each side of the target.
    pub window: usize,
    pub negatives_per_positive: usize,
    pub epochs: usize,
    pub initial_learning_rate: f64,
    pub min_count: u64,
    pub unigram_power: f64,
    pub seed: u64,
}

impl Default for SkipgramConfig {
    fn default() -> Self {
        SkipgramConfig {
            dim: 50,
            window: 5,
            negatives_per_positive: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            min_count: 2,
            unigram_power: 0.75,
            seed: 1,
        }
    }
}

impl SkipgramConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.window == 0 || self.negatives_per_positive == 0 || self.epochs == 0 {
            return bad("window, negatives and epochs must be positive");
        }
        if self.min_count == 0 {
            return bad("min_count must be positive");
        }
        if !(self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.unigram_power > 0.0 && self.unigram_power <= 1.0) {
            return bad("unigram_power must lie in (0, 1]");
        }
        Ok(())
    }
}

/// `log(1 + e^{-x})`, stable for large |x|.
pub fn logistic_loss(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

/// d/dx of [`logistic_loss`]: `-sigmoid(-x)`.
pub fn logistic_loss_grad(x: f64) -> f64 {
    -sigmoid(-x)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of one (target, context) example with its negatives:
/// `l(u·v_c) + Σ_n l(-u·v_n)`.
pub fn sgns_example_loss(target: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    logistic_loss(dot(target, context))
        + negatives
            .iter()
            .map(|n| logistic_loss(-dot(target, n)))
            .sum::<f64>()
}

/// Analytic gradients of [`sgns_example_loss`] as
/// `(d/d target, d/d context, [d/d negative_i])`.
pub fn sgns_example_grad(
    target: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let gp = logistic_loss_grad(dot(target, context));
    let mut d_target: Vec<f64> = context.iter().map(|v| gp * v).collect();
    let d_context: Vec<f64> = target.iter().map(|u| gp * u).collect();
    let mut d_neg = Vec::with_capacity(negatives.len());
    for n in negatives {
        // d/ds l(-s) = -l'(-s)
        let gn = -logistic_loss_grad(-dot(target, n));
        for (d, v) in d_target.iter_mut().zip(n.iter()) {
            *d += gn * v;
        }
        d_neg.push(target.iter().map(|u| gn * u).collect());
    }
    (d_target, d_context, d_neg)
}

pub fn train_skipgram(corpus: &Corpus, config: &SkipgramConfig) -> Result<EmbeddingTable> {
    train_skipgram_monitored(corpus, config).map(|(table, _)| table)
}

/// Trains and also returns the mean example loss of each epoch (measured
/// before each update).
pub fn train_skipgram_monitored(
    corpus: &Corpus,
    config: &SkipgramConfig,
) -> Result<(EmbeddingTable, Vec<f64>)> {
    config.validate()?;
    if corpus.is_empty() || corpus.token_count() == 0 {
        return Err(Error::EmptyCorpus);
    }
    let dim = config.dim;
    let vocab = corpus.tokens().len();
    let sampler = NegativeSampler::new(&corpus.frequencies(), config.unigram_power)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut target: Vec<f64> = (0..vocab * dim)
        .map(|_| (rng.random::<f64>() - 0.5) / dim as f64)
        .collect();
    let mut context = vec![0.0; vocab * dim];

    let total_steps = (config.epochs * corpus.token_count()) as f64;
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad_u = vec![0.0; dim];

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut examples = 0usize;
        for doc in corpus.documents() {
            for (t, &w) in doc.iter().enumerate() {
                let progress = step as f64 / total_steps;
                let lr = config.initial_learning_rate * (1.0 - progress).max(1e-4);
                step += 1;
                let lo = t.saturating_sub(config.window);
                let hi = (t + config.window + 1).min(doc.len());
                for (c_pos, &c) in doc.iter().enumerate().take(hi).skip(lo) {
                    if c_pos == t {
                        continue;
                    }
                    grad_u.iter_mut().for_each(|g| *g = 0.0);
                    let u_off = w * dim;
                    // positive
                    loss_sum += update_pair(
                        &target[u_off..u_off + dim],
                        &mut context,
                        c,
                        dim,
                        1.0,
                        lr,
                        &mut grad_u,
                    );
                    for _ in 0..config.negatives_per_positive {
                        let mut n = sampler.sample(&mut rng);
                        let mut tries = 0;
                        while n == c && tries < 8 {
                            n = sampler.sample(&mut rng);
                            tries += 1;
                        }
                        if n == c {
                            continue;
                        }
                        loss_sum += update_pair(
                            &target[u_off..u_off + dim],
                            &mut context,
                            n,
                            dim,
                            -1.0,
                            lr,
                            &mut grad_u,
                        );
                    }
                    for (u, g) in target[u_off..u_off + dim].iter_mut().zip(&grad_u) {
                        *u -= lr * g;
                    }
                    examples += 1;
                }
            }
        }
        epoch_losses.push(if examples > 0 {
            loss_sum / examples as f64
        } else {
            0.0
        });
    }

    if target.iter().chain(&context).any(|x| !x.is_finite()) {
        return Err(Error::InvalidConfig(
            "skipgram diverged to non-finite vectors; lower the learning rate".into(),
        ));
    }
    let table = EmbeddingTable::new(dim, corpus.tokens().to_vec(), target, Some(context))?;
    Ok((table, epoch_losses))
}

/// One term `l(sign * u·v)`: updates `v` in place, accumulates the
/// gradient for `u`, and returns the loss before the update.
fn update_pair(
    u: &[f64],
    context: &mut [f64],
    row: usize,
    dim: usize,
    sign: f64,
    lr: f64,
    grad_u: &mut [f64],
) -> f64 {
    let v = &mut context[row * dim..(row + 1) * dim];
    let s = sign * dot(u, v);
    let g = sign * logistic_loss_grad(s);
    for ((gu, vi), ui) in grad_u.iter_mut().zip(v.iter_mut()).zip(u) {
        *gu += g * *vi;
        *vi -= lr * g * ui;
    }
    logistic_loss(s)
}
