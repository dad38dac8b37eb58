//! Model checkpoint file.
//!
//! JSON document, version 1:
//!
//! ```json
//! {
//!   "format": "eventf2s-checkpoint",
//!   "version": 1,
//!   "epoch": 12,
//!   "layers": [
//!     { "spec": { "kind": { "type": "conv", "kernel": 5, "stride": 2 },
//!                 "in_channels": 1, "in_height": 34, "in_width": 34,
//!                 "out_channels": 32 },
//!       "weights": [ ... ] }
//!   ]
//! }
//! ```
//!
//! Conv weights are laid out `[out_channel][in_channel][ky][kx]`, dense
//! weights `[output][input]` with inputs flattened channel-major. Floats are
//! written in shortest round-trip form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{F2sNetwork, Layer, NetError};

pub const FORMAT: &str = "eventf2s-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint {format:?} version {version}")]
    Unsupported { format: String, version: u32 },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    /// Completed epochs.
    pub epoch: usize,
    pub layers: Vec<Layer>,
}

impl Checkpoint {
    pub fn new(net: &F2sNetwork, epoch: usize) -> Self {
        Checkpoint { format: FORMAT.into(), version: VERSION, epoch, layers: net.layers.clone() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint is always serialisable")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(CheckpointError::Unsupported { format: ck.format, version: ck.version });
        }
        Ok(ck)
    }

    /// Rebuilds the network, validating layer chaining and weight counts.
    pub fn network(&self) -> Result<F2sNetwork, CheckpointError> {
        let specs: Vec<_> = self.layers.iter().map(|l| l.spec).collect();
        let mut net = F2sNetwork::new(&specs)?;
        for (dst, src) in net.layers.iter_mut().zip(&self.layers) {
            dst.weights = src.weights.clone();
        }
        net.check_weights()?;
        Ok(net)
    }
}
