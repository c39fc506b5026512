//! Fixed input standardization, fit once on the training features and
//! stored with the model. Count-like inputs (popularity, GMV, daily counts)
//! go through `ln(1 + x)` before centering.

use serde::{Deserialize, Serialize};

use super::network::NetworkConfig;
use crate::features::{FeatureVector, DENSE_GMV, DENSE_POPULARITY};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Log1p,
}

impl Transform {
    fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Log1p => x.max(0.0).ln_1p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockScaler {
    pub transform: Vec<Transform>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl BlockScaler {
    pub fn identity(n: usize) -> Self {
        BlockScaler {
            transform: vec![Transform::Identity; n],
            mean: vec![0.0; n],
            scale: vec![1.0; n],
        }
    }

    fn fit<'a, I>(transform: Vec<Transform>, rows: I) -> Self
    where
        I: Iterator<Item = &'a [f64]>,
    {
        let n = transform.len();
        let mut sum = vec![0.0; n];
        let mut sq = vec![0.0; n];
        let mut count = 0usize;
        for row in rows {
            for (i, &x) in row.iter().enumerate() {
                let t = transform[i].apply(x);
                sum[i] += t;
                sq[i] += t * t;
            }
            count += 1;
        }
        if count == 0 {
            return BlockScaler {
                transform,
                mean: vec![0.0; n],
                scale: vec![1.0; n],
            };
        }
        let c = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let sd = (q / c - m * m).max(0.0).sqrt();
                if sd > 1e-9 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        BlockScaler {
            transform,
            mean,
            scale,
        }
    }

    fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            x.iter()
                .enumerate()
                .map(|(i, &v)| (self.transform[i].apply(v) - self.mean[i]) / self.scale[i]),
        );
    }

    fn len(&self) -> usize {
        self.transform.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    pub dense: BlockScaler,
    pub series: BlockScaler,
    pub context: BlockScaler,
}

impl InputScaler {
    pub fn identity(dense: usize, series: usize, context: usize) -> Self {
        InputScaler {
            dense: BlockScaler::identity(dense),
            series: BlockScaler::identity(series),
            context: BlockScaler::identity(context),
        }
    }

    /// Standardizes every input over `features`, with `ln(1 + x)` applied
    /// first to decayed popularity, decayed GMV and the daily series.
    pub fn fit<'a>(features: &[&'a FeatureVector]) -> Result<Self> {
        let first = features.first().ok_or(Error::EmptyTrainingSet)?;
        let mut dense_t = vec![Transform::Identity; first.dense.len()];
        for idx in [DENSE_POPULARITY, DENSE_GMV] {
            if idx < dense_t.len() {
                dense_t[idx] = Transform::Log1p;
            }
        }
        let series_t = vec![Transform::Log1p; first.series.len()];
        let context_t = vec![Transform::Identity; first.context.len()];
        Ok(InputScaler {
            dense: BlockScaler::fit(dense_t, features.iter().map(|f| f.dense.as_slice())),
            series: BlockScaler::fit(series_t, features.iter().map(|f| f.series.as_slice())),
            context: BlockScaler::fit(context_t, features.iter().map(|f| f.context.as_slice())),
        })
    }

    pub fn check_dims(&self, cfg: &NetworkConfig) -> Result<()> {
        let ok = self.dense.len() == cfg.dense_len
            && self.series.len() == cfg.series_len
            && self.context.len() == cfg.context_len
            && [&self.dense, &self.series, &self.context]
                .iter()
                .all(|b| b.mean.len() == b.len() && b.scale.len() == b.len());
        if ok {
            Ok(())
        } else {
            Err(Error::LayoutMismatch(
                "input scaler does not match the network block sizes".into(),
            ))
        }
    }

    pub fn apply(
        &self,
        f: &FeatureVector,
        dense: &mut Vec<f64>,
        series: &mut Vec<f64>,
        context: &mut Vec<f64>,
    ) {
        self.dense.apply_into(&f.dense, dense);
        self.series.apply_into(&f.series, series);
        self.context.apply_into(&f.context, context);
    }
}
