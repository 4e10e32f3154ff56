//! Per-position value networks for Doudizhu.
//!
//! Every network maps a batch of candidate-move observations to one
//! `(p, Q_w, Q_l)` triple per candidate. `p` is squashed into `(-1, 1)`;
//! the win probability is `(p + 1)/2`.

pub mod checkpoint;
pub mod config;
pub mod error;
mod layers;
pub mod loss;
pub mod net;
pub mod optim;

use std::sync::Arc;

pub use checkpoint::Checkpoint;
pub use config::{NetConfig, NetKind, Position, StageSpec};
pub use error::{ModelError, Result};
pub use loss::{loss, LossReport, LossWeights, Target};
pub use net::{Input, Network};
pub use optim::{Optimizer, OptimizerConfig};

/// A published, immutable copy of one network. Readers holding a snapshot
/// never see a later update.
pub type ParameterSnapshot = Arc<Network>;
