use std::path::Path;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use super::mlp::MlpConfig;
use super::network::{InputLayout, NetworkConfig, SdfNetwork};
use super::train::TrainConfig;
use crate::{Error, Result};

const MAGIC: &[u8; 5] = b"NSDF1";

/// JSON header preceding the f32 parameter blob.
///
/// Blob order: decoder parameters, projection parameters, then the Adam
/// first and second moments when `adam` is present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub network: NetworkConfig,
    pub mlp: MlpConfig,
    pub input_layout: InputLayout,
    pub num_params: usize,
    pub seed: u64,
    pub iteration: u64,
    pub adam: Option<AdamState>,
    pub train: Option<TrainConfig>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub network: SdfNetwork,
    pub adam: Option<AdamState>,
}

impl Checkpoint {
    pub fn new(network: SdfNetwork, adam: Option<AdamState>, iteration: u64, train: Option<TrainConfig>) -> Self {
        let header = CheckpointHeader {
            network: network.config().clone(),
            mlp: network.mlp().config().clone(),
            input_layout: network.layout(),
            num_params: network.num_params(),
            seed: network.config().seed,
            iteration,
            adam: adam.clone(),
            train,
        };
        Self { header, network, adam }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&self.header)?;
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + header.len() + 4 * 3 * self.header.num_params);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        let mut push = |values: &[f64]| {
            for v in values {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        };
        push(&self.network.params());
        if let Some(a) = &self.adam {
            push(&a.m);
            push(&a.v);
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 9 || &bytes[..5] != MAGIC {
            return Err(Error::Format("missing NSDF1 magic".into()));
        }
        let len = u32::from_le_bytes([bytes[5], bytes[6], bytes[7], bytes[8]]) as usize;
        let body = bytes.get(9..9 + len).ok_or_else(|| Error::Format("checkpoint header truncated".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(body)?;
        let blob = &bytes[9 + len..];
        let values: Vec<f64> = blob
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let n = header.num_params;
        let expected = if header.adam.is_some() { 3 * n } else { n };
        if values.len() != expected || blob.len() % 4 != 0 {
            return Err(Error::Format(format!("checkpoint blob holds {} values, expected {expected}", values.len())));
        }
        let network = SdfNetwork::from_params(header.network.clone(), &values[..n])?;
        if network.layout() != header.input_layout || network.mlp().config() != &header.mlp {
            return Err(Error::HeaderMismatch("checkpoint layout disagrees with its network config".into()));
        }
        let adam = header.adam.clone().map(|mut a| {
            a.m = values[n..2 * n].to_vec();
            a.v = values[2 * n..].to_vec();
            a
        });
        Ok(Self { header, network, adam })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
