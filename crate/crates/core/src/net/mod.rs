//! LSTM classifier: embedding lookup, one or two (bi)directional LSTM layers,
//! per-step inverted dropout, a sigmoid output node and binary cross-entropy,
//! with exact backpropagation through time and plain mini-batch SGD.

mod cell;
mod checkpoint;
mod dropout;
mod layer;
mod network;
mod output;

use serde::{Deserialize, Serialize};

pub use cell::{cell_step, CellState, GateActivations, LstmParams};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use dropout::{dropout_apply, DropoutMasks, DropoutMode};
pub use layer::{layer_forward, LstmLayer};
pub use network::{Gradients, Network, Sample};
pub use output::{bce_loss, classify, output_node, DenseParams, LOSS_EPSILON};

pub const DEFAULT_LEARNING_RATE: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uni,
    Bi,
}

impl Direction {
    pub fn multiplier(self) -> usize {
        match self {
            Direction::Uni => 1,
            Direction::Bi => 2,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Uni => "uni",
            Direction::Bi => "bi",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "uni" | "unidirectional" => Ok(Direction::Uni),
            "bi" | "bidirectional" => Ok(Direction::Bi),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown direction `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden_units: usize,
    pub dropout: f64,
    pub direction: Direction,
    pub num_layers: usize,
    pub seed: u64,
    /// Initialise the forget-gate bias to 1 instead of 0.
    #[serde(default)]
    pub forget_bias_one: bool,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden_units: 100,
            dropout: 0.2,
            direction: Direction::Uni,
            num_layers: 1,
            seed: 0,
            forget_bias_one: false,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.hidden_units < 1 {
            return Err(crate::Error::InvalidArgument(
                "hidden units must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(crate::Error::InvalidArgument(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(1..=2).contains(&self.num_layers) {
            return Err(crate::Error::InvalidArgument(format!(
                "num_layers must be 1 or 2, got {}",
                self.num_layers
            )));
        }
        Ok(())
    }

    /// Width of each layer's per-step output.
    pub fn output_dim(&self) -> usize {
        self.hidden_units * self.direction.multiplier()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
