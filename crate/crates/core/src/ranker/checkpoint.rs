//! Checkpoint container.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "ACRKCKPT"
//! 8       4     format version, u32 little-endian
//! 12      8     header length N in bytes, u64 little-endian
//! 20      N     header, UTF-8 JSON (see `Header`)
//! 20+N    8·P   parameters, f64 little-endian, in tensor-directory order
//! ```
//!
//! The header carries the network config, the feature layout the model was
//! trained on, the fitted input scaler, the tensor directory (name, shape,
//! offset) and training metadata. Loading rebuilds the directory from the
//! config and refuses a file whose directory disagrees.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::network::{Network, NetworkConfig, TensorSpec};
use super::scaler::InputScaler;
use super::train::{TrainConfig, TrainingHistory};
use crate::features::FeatureLayout;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ACRKCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub train: Option<TrainConfig>,
    pub history: TrainingHistory,
    pub train_pairs: usize,
    pub val_pairs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub layout: FeatureLayout,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct Header {
    network: NetworkConfig,
    feature_layout: FeatureLayout,
    scaler: InputScaler,
    tensors: Vec<TensorSpec>,
    metadata: TrainingMetadata,
}

#[derive(Serialize)]
struct DebugTensor<'a> {
    name: &'a str,
    shape: &'a [usize],
    values: &'a [f64],
}

#[derive(Serialize)]
struct DebugExport<'a> {
    format_version: u32,
    network: &'a NetworkConfig,
    feature_layout: &'a FeatureLayout,
    scaler: &'a InputScaler,
    metadata: &'a TrainingMetadata,
    tensors: Vec<DebugTensor<'a>>,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn new(network: Network, layout: FeatureLayout, metadata: TrainingMetadata) -> Result<Self> {
        check_blocks(&network.config, &layout)?;
        Ok(Checkpoint {
            network,
            layout,
            metadata,
        })
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Header {
            network: self.network.config.clone(),
            feature_layout: self.layout.clone(),
            scaler: self.network.scaler.clone(),
            tensors: self.network.layout().tensors.clone(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        let mut buf = Vec::with_capacity(self.network.params.len() * 8);
        for p in &self.network.params {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        out.write_all(&buf)?;
        out.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut v = Vec::new();
        self.save(&mut v)?;
        Ok(v)
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input
            .read_exact(&mut magic)
            .map_err(|_| corrupt("file too short for a checkpoint"))?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(corrupt("not a checkpoint file (bad magic)"));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word).map_err(|_| corrupt("truncated version"))?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(corrupt(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len).map_err(|_| corrupt("truncated header length"))?;
        let len = u64::from_le_bytes(len);
        if len > (1 << 30) {
            return Err(corrupt(format!("implausible header length {len}")));
        }
        let mut json = vec![0u8; len as usize];
        input.read_exact(&mut json).map_err(|_| corrupt("truncated header"))?;
        let header: Header = serde_json::from_slice(&json)?;

        let expected = super::network::ParamLayout::new(&header.network);
        if expected.tensors != header.tensors {
            return Err(corrupt("tensor directory does not match the network config"));
        }
        let mut data = Vec::new();
        input.read_to_end(&mut data)?;
        if data.len() != expected.total * 8 {
            return Err(corrupt(format!(
                "expected {} parameter bytes, found {}",
                expected.total * 8,
                data.len()
            )));
        }
        let params: Vec<f64> = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        if params.iter().any(|p| !p.is_finite()) {
            return Err(corrupt("non-finite parameter"));
        }
        let network = Network::from_parts(header.network, header.scaler, params)?;
        Checkpoint::new(network, header.feature_layout, header.metadata)
    }

    /// Human-readable JSON with every tensor spelled out.
    pub fn export_json<W: Write>(&self, out: W) -> Result<()> {
        let net = &self.network;
        let export = DebugExport {
            format_version: CHECKPOINT_VERSION,
            network: &net.config,
            feature_layout: &self.layout,
            scaler: &net.scaler,
            metadata: &self.metadata,
            tensors: net
                .layout()
                .tensors
                .iter()
                .map(|t| DebugTensor {
                    name: &t.name,
                    shape: &t.shape,
                    values: &net.params[t.range()],
                })
                .collect(),
        };
        serde_json::to_writer_pretty(out, &export)?;
        Ok(())
    }
}

fn check_blocks(cfg: &NetworkConfig, layout: &FeatureLayout) -> Result<()> {
    let checks = [
        ("dense", layout.dense_len(), cfg.dense_len),
        ("series", layout.series_len, cfg.series_len),
        ("context", layout.context_len(), cfg.context_len),
    ];
    for (name, from_layout, from_net) in checks {
        if from_layout != from_net {
            return Err(Error::LayoutMismatch(format!(
                "{name} block: feature layout has {from_layout}, network expects {from_net}"
            )));
        }
    }
    Ok(())
}
