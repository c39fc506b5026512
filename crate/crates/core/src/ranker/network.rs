//! The scoring network.
//!
//! One tower per feature block, shared by both sides of a pair:
//!
//! ```text
//! dense   -> Linear(Q) -> ReLU -> dropout ─┐
//! series  -> LSTM(U), final hidden -> dropout ─┼─ concat -> Linear(M) -> ReLU -> Linear(1) = f
//! context -> Linear(C) -> ReLU -> dropout ─┘
//! ```
//!
//! Parameters live in one flat `Vec<f64>`; [`ParamLayout`] names the
//! tensors inside it. With `ablate_context` the context tower does not
//! exist and the head only sees the query and recurrent representations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scaler::InputScaler;
use crate::features::FeatureVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub dense_len: usize,
    pub series_len: usize,
    pub context_len: usize,
    pub query_repr_units: usize,
    pub lstm_units: usize,
    pub context_repr_units: usize,
    pub head_units: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    pub ablate_delta_ndcg: bool,
    pub ablate_context: bool,
}

impl NetworkConfig {
    /// Default widths (128 / 16 / 128, head 64, dropout 0.1) for the given
    /// block sizes.
    pub fn with_dims(dense_len: usize, series_len: usize, context_len: usize) -> Self {
        NetworkConfig {
            dense_len,
            series_len,
            context_len,
            query_repr_units: 128,
            lstm_units: 16,
            context_repr_units: 128,
            head_units: 64,
            dropout_rate: 0.1,
            seed: 1,
            ablate_delta_ndcg: false,
            ablate_context: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.dense_len,
            self.series_len,
            self.context_len,
            self.query_repr_units,
            self.lstm_units,
            self.context_repr_units,
            self.head_units,
        ];
        if dims.contains(&0) {
            return Err(Error::InvalidConfig("all layer sizes must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig("dropout_rate must lie in [0, 1)".into()));
        }
        Ok(())
    }

    fn merged_width(&self) -> usize {
        self.query_repr_units
            + self.lstm_units
            + if self.ablate_context {
                0
            } else {
                self.context_repr_units
            }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of each tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub tensors: Vec<TensorSpec>,
    pub total: usize,
    q_w: usize,
    q_b: usize,
    l_wx: usize,
    l_wh: usize,
    l_b: usize,
    c_w: Option<usize>,
    c_b: Option<usize>,
    m_w: usize,
    m_b: usize,
    o_w: usize,
    o_b: usize,
}

impl ParamLayout {
    pub fn new(cfg: &NetworkConfig) -> Self {
        let (q, u, c, m) = (
            cfg.query_repr_units,
            cfg.lstm_units,
            cfg.context_repr_units,
            cfg.head_units,
        );
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut add = |name: &str, shape: Vec<usize>| {
            let spec = TensorSpec {
                name: name.to_string(),
                shape,
                offset,
            };
            offset += spec.len();
            let at = spec.offset;
            tensors.push(spec);
            at
        };
        let q_w = add("query.weight", vec![q, cfg.dense_len]);
        let q_b = add("query.bias", vec![q]);
        let l_wx = add("lstm.weight_input", vec![4 * u, 1]);
        let l_wh = add("lstm.weight_hidden", vec![4 * u, u]);
        let l_b = add("lstm.bias", vec![4 * u]);
        let (c_w, c_b) = if cfg.ablate_context {
            (None, None)
        } else {
            (
                Some(add("context.weight", vec![c, cfg.context_len])),
                Some(add("context.bias", vec![c])),
            )
        };
        let m_w = add("head.weight", vec![m, cfg.merged_width()]);
        let m_b = add("head.bias", vec![m]);
        let o_w = add("out.weight", vec![1, m]);
        let o_b = add("out.bias", vec![1]);
        ParamLayout {
            tensors,
            total: offset,
            q_w,
            q_b,
            l_wx,
            l_wh,
            l_b,
            c_w,
            c_b,
            m_w,
            m_b,
            o_w,
            o_b,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `y = W x + b` for a row-major `W` of shape `[y.len(), x.len()]`.
#[inline]
fn affine(w: &[f64], b: &[f64], x: &[f64], y: &mut [f64]) {
    let n = x.len();
    for (o, yo) in y.iter_mut().enumerate() {
        let row = &w[o * n..(o + 1) * n];
        *yo = b[o] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Accumulates gradients of `y = W x + b` given `dy`; adds `W^T dy` into
/// `dx` when provided.
#[inline]
fn affine_backward(
    w: &[f64],
    x: &[f64],
    dy: &[f64],
    gw: &mut [f64],
    gb: &mut [f64],
    mut dx: Option<&mut [f64]>,
) {
    let n = x.len();
    for (o, &d) in dy.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        gb[o] += d;
        let grow = &mut gw[o * n..(o + 1) * n];
        for (g, xi) in grow.iter_mut().zip(x) {
            *g += d * xi;
        }
        if let Some(dx) = dx.as_deref_mut() {
            let row = &w[o * n..(o + 1) * n];
            for (dxi, wi) in dx.iter_mut().zip(row) {
                *dxi += d * wi;
            }
        }
    }
}

/// Activations kept from a forward pass for backpropagation. Buffers are
/// reused across calls.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    dense: Vec<f64>,
    series: Vec<f64>,
    context: Vec<f64>,
    q_pre: Vec<f64>,
    q_mask: Vec<f64>,
    // per step, gates laid out [i | f | g | o], each `u` wide
    gates: Vec<f64>,
    cells: Vec<f64>,
    tanh_cells: Vec<f64>,
    hiddens: Vec<f64>,
    l_mask: Vec<f64>,
    c_pre: Vec<f64>,
    c_mask: Vec<f64>,
    merged: Vec<f64>,
    m_pre: Vec<f64>,
    m_act: Vec<f64>,
    pub score: f64,
}

/// Features after input scaling, ready to be copied into a cache.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledInput {
    pub dense: Vec<f64>,
    pub series: Vec<f64>,
    pub context: Vec<f64>,
}

impl ForwardCache {
    pub fn load(&mut self, x: &ScaledInput) {
        self.dense.clear();
        self.dense.extend_from_slice(&x.dense);
        self.series.clear();
        self.series.extend_from_slice(&x.series);
        self.context.clear();
        self.context.extend_from_slice(&x.context);
    }
}

/// Scratch space for backpropagation.
#[derive(Debug, Clone, Default)]
pub struct BackwardScratch {
    d_merged: Vec<f64>,
    d_m: Vec<f64>,
    d_h: Vec<f64>,
    d_c: Vec<f64>,
    d_gates: Vec<f64>,
    d_h_prev: Vec<f64>,
    d_q: Vec<f64>,
    d_ctx: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub scaler: InputScaler,
    layout: ParamLayout,
    pub params: Vec<f64>,
}

impl Network {
    /// Xavier-uniform weights, zero biases, forget-gate bias 1.
    pub fn init(config: NetworkConfig, scaler: InputScaler) -> Result<Self> {
        config.validate()?;
        scaler.check_dims(&config)?;
        let layout = ParamLayout::new(&config);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.total];
        for spec in &layout.tensors {
            if spec.shape.len() == 2 && !spec.name.ends_with("bias") {
                let (fan_out, fan_in) = (spec.shape[0], spec.shape[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for p in &mut params[spec.range()] {
                    *p = rng.random_range(-limit..limit);
                }
            }
        }
        let u = config.lstm_units;
        for p in &mut params[layout.l_b + u..layout.l_b + 2 * u] {
            *p = 1.0;
        }
        Ok(Network {
            config,
            scaler,
            layout,
            params,
        })
    }

    pub fn from_parts(config: NetworkConfig, scaler: InputScaler, params: Vec<f64>) -> Result<Self> {
        config.validate()?;
        scaler.check_dims(&config)?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total {
            return Err(Error::DimensionMismatch {
                expected: layout.total,
                actual: params.len(),
            });
        }
        Ok(Network {
            config,
            scaler,
            layout,
            params,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn check_features(&self, f: &FeatureVector) -> Result<()> {
        let c = &self.config;
        let checks = [
            ("dense", c.dense_len, f.dense.len()),
            ("series", c.series_len, f.series.len()),
            ("context", c.context_len, f.context.len()),
        ];
        for (name, expected, actual) in checks {
            if expected != actual {
                return Err(Error::LayoutMismatch(format!(
                    "{name} block: expected {expected} values, got {actual}"
                )));
            }
        }
        for (name, block) in [("dense", &f.dense), ("series", &f.series), ("context", &f.context)] {
            if block.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteFeature(name));
            }
        }
        Ok(())
    }

    /// Applies the input scaler into the cache's input buffers.
    pub fn load_inputs(&self, f: &FeatureVector, cache: &mut ForwardCache) {
        self.scaler.apply(f, &mut cache.dense, &mut cache.series, &mut cache.context);
    }

    pub fn scale(&self, f: &FeatureVector) -> Result<ScaledInput> {
        self.check_features(f)?;
        let mut x = ScaledInput {
            dense: Vec::new(),
            series: Vec::new(),
            context: Vec::new(),
        };
        self.scaler.apply(f, &mut x.dense, &mut x.series, &mut x.context);
        Ok(x)
    }

    /// Score for one candidate. Dropout is applied only when `training`.
    pub fn forward_score<R: Rng + ?Sized>(
        &self,
        features: &FeatureVector,
        training: bool,
        rng: &mut R,
    ) -> Result<f64> {
        self.check_features(features)?;
        let mut cache = ForwardCache::default();
        self.load_inputs(features, &mut cache);
        Ok(self.forward_cached(&mut cache, training, rng))
    }

    /// Inference score without dropout.
    pub fn score(&self, features: &FeatureVector) -> Result<f64> {
        self.check_features(features)?;
        let mut cache = ForwardCache::default();
        self.load_inputs(features, &mut cache);
        Ok(self.forward_cached(&mut cache, false, &mut NoRng))
    }

    /// Smallest |pre-activation| over the ReLU units at inference. The score
    /// is not differentiable where this is 0, so finite-difference checks
    /// need it well above the step size.
    pub fn relu_margin(&self, features: &FeatureVector) -> Result<f64> {
        self.check_features(features)?;
        let mut cache = ForwardCache::default();
        self.load_inputs(features, &mut cache);
        self.forward_cached(&mut cache, false, &mut NoRng);
        let context = if self.layout.c_w.is_some() { &cache.c_pre[..] } else { &[] };
        Ok(cache
            .q_pre
            .iter()
            .chain(context)
            .chain(&cache.m_pre)
            .fold(f64::INFINITY, |m, x| m.min(x.abs())))
    }

    fn dropout_mask<R: Rng + ?Sized>(&self, mask: &mut Vec<f64>, n: usize, training: bool, rng: &mut R) {
        mask.clear();
        let rate = self.config.dropout_rate;
        if training && rate > 0.0 {
            let keep = 1.0 / (1.0 - rate);
            mask.extend((0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }));
        } else {
            mask.resize(n, 1.0);
        }
    }

    /// Forward pass over inputs already placed in the cache by
    /// [`load_inputs`](Network::load_inputs).
    pub fn forward_cached<R: Rng + ?Sized>(
        &self,
        cache: &mut ForwardCache,
        training: bool,
        rng: &mut R,
    ) -> f64 {
        let cfg = &self.config;
        let l = self.layout();
        let p = &self.params;
        let (qn, u, cn, mn) = (
            cfg.query_repr_units,
            cfg.lstm_units,
            cfg.context_repr_units,
            cfg.head_units,
        );
        let width = cfg.merged_width();
        cache.merged.clear();
        cache.merged.resize(width, 0.0);

        // query tower
        cache.q_pre.resize(qn, 0.0);
        affine(
            &p[l.q_w..l.q_w + qn * cfg.dense_len],
            &p[l.q_b..l.q_b + qn],
            &cache.dense,
            &mut cache.q_pre,
        );
        let mut mask = std::mem::take(&mut cache.q_mask);
        self.dropout_mask(&mut mask, qn, training, rng);
        for i in 0..qn {
            cache.merged[i] = cache.q_pre[i].max(0.0) * mask[i];
        }
        cache.q_mask = mask;

        // recurrent tower
        let steps = cfg.series_len;
        cache.gates.resize(steps * 4 * u, 0.0);
        cache.cells.resize(steps * u, 0.0);
        cache.tanh_cells.resize(steps * u, 0.0);
        cache.hiddens.resize(steps * u, 0.0);
        let wx = &p[l.l_wx..l.l_wx + 4 * u];
        let wh = &p[l.l_wh..l.l_wh + 4 * u * u];
        let lb = &p[l.l_b..l.l_b + 4 * u];
        for t in 0..steps {
            let x = cache.series[t];
            let (past_h, cur_h) = cache.hiddens.split_at_mut(t * u);
            let g = &mut cache.gates[t * 4 * u..(t + 1) * 4 * u];
            for r in 0..4 * u {
                let mut a = lb[r] + wx[r] * x;
                if t > 0 {
                    let h = &past_h[(t - 1) * u..];
                    let row = &wh[r * u..(r + 1) * u];
                    a += row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>();
                }
                g[r] = if (2 * u..3 * u).contains(&r) {
                    a.tanh()
                } else {
                    sigmoid(a)
                };
            }
            let (past_c, cur_c) = cache.cells.split_at_mut(t * u);
            for j in 0..u {
                let (ig, fg, gg, og) = (g[j], g[u + j], g[2 * u + j], g[3 * u + j]);
                let pc = if t > 0 { past_c[(t - 1) * u + j] } else { 0.0 };
                let c = fg * pc + ig * gg;
                let tc = c.tanh();
                cur_c[j] = c;
                cache.tanh_cells[t * u + j] = tc;
                cur_h[j] = og * tc;
            }
        }
        let mut mask = std::mem::take(&mut cache.l_mask);
        self.dropout_mask(&mut mask, u, training, rng);
        let last = &cache.hiddens[(steps - 1) * u..steps * u];
        for j in 0..u {
            cache.merged[qn + j] = last[j] * mask[j];
        }
        cache.l_mask = mask;

        // context tower
        if let (Some(c_w), Some(c_b)) = (l.c_w, l.c_b) {
            cache.c_pre.resize(cn, 0.0);
            affine(
                &p[c_w..c_w + cn * cfg.context_len],
                &p[c_b..c_b + cn],
                &cache.context,
                &mut cache.c_pre,
            );
            let mut mask = std::mem::take(&mut cache.c_mask);
            self.dropout_mask(&mut mask, cn, training, rng);
            for i in 0..cn {
                cache.merged[qn + u + i] = cache.c_pre[i].max(0.0) * mask[i];
            }
            cache.c_mask = mask;
        }

        // head
        cache.m_pre.resize(mn, 0.0);
        cache.m_act.resize(mn, 0.0);
        affine(
            &p[l.m_w..l.m_w + mn * width],
            &p[l.m_b..l.m_b + mn],
            &cache.merged,
            &mut cache.m_pre,
        );
        for i in 0..mn {
            cache.m_act[i] = cache.m_pre[i].max(0.0);
        }
        let ow = &p[l.o_w..l.o_w + mn];
        cache.score = p[l.o_b] + ow.iter().zip(&cache.m_act).map(|(a, b)| a * b).sum::<f64>();
        cache.score
    }

    /// Adds `d_score * d(score)/d(params)` into `grads`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_score: f64,
        grads: &mut [f64],
        s: &mut BackwardScratch,
    ) {
        if d_score == 0.0 {
            return;
        }
        let cfg = &self.config;
        let l = self.layout();
        let p = &self.params;
        let (qn, u, cn, mn) = (
            cfg.query_repr_units,
            cfg.lstm_units,
            cfg.context_repr_units,
            cfg.head_units,
        );
        let width = cfg.merged_width();

        // out layer
        grads[l.o_b] += d_score;
        s.d_m.clear();
        s.d_m.resize(mn, 0.0);
        for i in 0..mn {
            grads[l.o_w + i] += d_score * cache.m_act[i];
            if cache.m_pre[i] > 0.0 {
                s.d_m[i] = d_score * p[l.o_w + i];
            }
        }
        // head
        s.d_merged.clear();
        s.d_merged.resize(width, 0.0);
        {
            let (gw, rest) = grads[l.m_w..].split_at_mut(mn * width);
            let gb = &mut rest[l.m_b - l.m_w - mn * width..][..mn];
            affine_backward(
                &p[l.m_w..l.m_w + mn * width],
                &cache.merged,
                &s.d_m,
                gw,
                gb,
                Some(&mut s.d_merged),
            );
        }

        // query tower
        s.d_q.clear();
        s.d_q.resize(qn, 0.0);
        for i in 0..qn {
            if cache.q_pre[i] > 0.0 {
                s.d_q[i] = s.d_merged[i] * cache.q_mask[i];
            }
        }
        {
            let (gw, rest) = grads[l.q_w..].split_at_mut(qn * cfg.dense_len);
            let gb = &mut rest[l.q_b - l.q_w - qn * cfg.dense_len..][..qn];
            affine_backward(&p[l.q_w..], &cache.dense, &s.d_q, gw, gb, None);
        }

        // context tower
        if let (Some(c_w), Some(c_b)) = (l.c_w, l.c_b) {
            s.d_ctx.clear();
            s.d_ctx.resize(cn, 0.0);
            for i in 0..cn {
                if cache.c_pre[i] > 0.0 {
                    s.d_ctx[i] = s.d_merged[qn + u + i] * cache.c_mask[i];
                }
            }
            let (gw, rest) = grads[c_w..].split_at_mut(cn * cfg.context_len);
            let gb = &mut rest[c_b - c_w - cn * cfg.context_len..][..cn];
            affine_backward(&p[c_w..], &cache.context, &s.d_ctx, gw, gb, None);
        }

        // recurrent tower, backpropagation through time
        let steps = cfg.series_len;
        s.d_h.clear();
        s.d_h.extend((0..u).map(|j| s.d_merged[qn + j] * cache.l_mask[j]));
        s.d_c.clear();
        s.d_c.resize(u, 0.0);
        s.d_gates.resize(4 * u, 0.0);
        let wh = &p[l.l_wh..l.l_wh + 4 * u * u];
        for t in (0..steps).rev() {
            let g = &cache.gates[t * 4 * u..(t + 1) * 4 * u];
            let tc = &cache.tanh_cells[t * u..(t + 1) * u];
            for j in 0..u {
                let (ig, fg, gg, og) = (g[j], g[u + j], g[2 * u + j], g[3 * u + j]);
                let d_o = s.d_h[j] * tc[j];
                s.d_c[j] += s.d_h[j] * og * (1.0 - tc[j] * tc[j]);
                let pc = if t == 0 { 0.0 } else { cache.cells[(t - 1) * u + j] };
                let d_i = s.d_c[j] * gg;
                let d_g = s.d_c[j] * ig;
                let d_f = s.d_c[j] * pc;
                s.d_gates[j] = d_i * ig * (1.0 - ig);
                s.d_gates[u + j] = d_f * fg * (1.0 - fg);
                s.d_gates[2 * u + j] = d_g * (1.0 - gg * gg);
                s.d_gates[3 * u + j] = d_o * og * (1.0 - og);
                s.d_c[j] *= fg;
            }
            let x = cache.series[t];
            s.d_h_prev.clear();
            s.d_h_prev.resize(u, 0.0);
            for r in 0..4 * u {
                let d = s.d_gates[r];
                if d == 0.0 {
                    continue;
                }
                grads[l.l_b + r] += d;
                grads[l.l_wx + r] += d * x;
                if t > 0 {
                    let h_prev = &cache.hiddens[(t - 1) * u..t * u];
                    let row = &wh[r * u..(r + 1) * u];
                    let grow = &mut grads[l.l_wh + r * u..l.l_wh + (r + 1) * u];
                    for j in 0..u {
                        grow[j] += d * h_prev[j];
                        s.d_h_prev[j] += d * row[j];
                    }
                }
            }
            std::mem::swap(&mut s.d_h, &mut s.d_h_prev);
        }
    }
}

/// Stand-in RNG for inference paths, where dropout never draws.
pub(crate) struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference does not sample")
    }

    fn next_u64(&mut self) -> u64 {
        unreachable!("inference does not sample")
    }

    fn fill_bytes(&mut self, _dst: &mut [u8]) {
        unreachable!("inference does not sample")
    }
}
