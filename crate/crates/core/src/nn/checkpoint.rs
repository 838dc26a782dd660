//! JSON checkpoint format for a single network.

use serde::{Deserialize, Serialize};

use super::Network;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// `{"format_version": 1, "seed": 42, "layers": [{"input_width": .., "output_width": ..,
/// "activation": "relu", "weights": [..row-major..], "bias": [..]}, ..]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub seed: u64,
    pub layers: Network,
}

impl NetworkCheckpoint {
    pub fn new(network: Network, seed: u64) -> Self {
        NetworkCheckpoint {
            format_version: FORMAT_VERSION,
            seed,
            layers: network,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates version and layer shapes.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ckpt: NetworkCheckpoint = serde_json::from_slice(bytes)?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.layers
            .validate()
            .map_err(|e| Error::Checkpoint(e.to_string()))
    }
}
