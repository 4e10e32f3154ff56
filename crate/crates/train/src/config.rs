use std::path::Path;

use ddz_core::PolicyConfig;
use ddz_model::{LossWeights, NetConfig, OptimizerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

/// ε, constant or decaying linearly to `epsilon_final` over `decay_frames`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationConfig {
    pub epsilon: f64,
    pub epsilon_final: Option<f64>,
    pub decay_frames: u64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig { epsilon: 0.1, epsilon_final: None, decay_frames: 0 }
    }
}

impl ExplorationConfig {
    pub fn constant(epsilon: f64) -> Self {
        ExplorationConfig { epsilon, ..Default::default() }
    }

    pub fn at(&self, frames: u64) -> f64 {
        let eps = match self.epsilon_final {
            Some(end) if self.decay_frames > 0 => {
                let t = (frames as f64 / self.decay_frames as f64).min(1.0);
                self.epsilon + (end - self.epsilon) * t
            }
            _ => self.epsilon,
        };
        eps.clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |e: f64| (0.0..=1.0).contains(&e);
        if !ok(self.epsilon) || !self.epsilon_final.is_none_or(ok) {
            return Err(TrainError::Config("epsilon must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetSize {
    #[default]
    Desk,
    Full,
}

impl NetSize {
    pub fn configs(self) -> (NetConfig, NetConfig) {
        match self {
            NetSize::Desk => (NetConfig::card_desk(), NetConfig::bid_desk()),
            NetSize::Full => (NetConfig::card_full(), NetConfig::bid_full()),
        }
    }
}

/// Training run parameters, read from TOML. Every key is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Actor threads; 0 runs actor and learner interleaved on one thread,
    /// which is bit-for-bit reproducible.
    pub actors: usize,
    pub epsilon: f64,
    pub epsilon_final: Option<f64>,
    pub epsilon_decay_frames: u64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub learning_rate: f64,
    /// `sgd` or `adam`.
    pub optimizer: String,
    pub max_grad_norm: Option<f64>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub reward_scale: f64,
    pub total_frames: u64,
    pub checkpoint_every: u64,
    pub seed: u64,
    pub net_size: NetSize,
    pub policy: PolicyConfig,
    pub probe_games: usize,
    pub output_dir: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            actors: 0,
            epsilon: 0.1,
            epsilon_final: None,
            epsilon_decay_frames: 0,
            alpha1: 1.0,
            alpha2: 1.0,
            learning_rate: 1e-4,
            optimizer: "sgd".into(),
            max_grad_norm: None,
            batch_size: 512,
            buffer_capacity: 50_000,
            reward_scale: 0.125,
            total_frames: 500_000,
            checkpoint_every: 100_000,
            seed: 0,
            net_size: NetSize::Desk,
            policy: PolicyConfig::default(),
            probe_games: 200,
            output_dir: "runs/default".into(),
        }
    }
}

impl TrainConfig {
    pub fn from_toml(text: &str) -> Result<TrainConfig> {
        let cfg: TrainConfig = toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainConfig> {
        TrainConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn exploration(&self) -> ExplorationConfig {
        ExplorationConfig {
            epsilon: self.epsilon,
            epsilon_final: self.epsilon_final,
            decay_frames: self.epsilon_decay_frames,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights { alpha1: self.alpha1, alpha2: self.alpha2 }
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        match self.optimizer.as_str() {
            "sgd" => Ok(OptimizerConfig::Sgd { lr: self.learning_rate }),
            "adam" => Ok(OptimizerConfig::adam(self.learning_rate)),
            other => Err(TrainError::Config(format!("unknown optimizer \"{other}\""))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.exploration().validate()?;
        self.loss_weights().validate()?;
        self.optimizer_config()?;
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(TrainError::Config("buffer_capacity must be at least batch_size".into()));
        }
        if !(self.learning_rate > 0.0 && self.reward_scale > 0.0) {
            return Err(TrainError::Config("learning_rate and reward_scale must be positive".into()));
        }
        if self.policy.rho <= 0.0 {
            return Err(TrainError::Config("rho must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = TrainConfig::from_toml("actors = 2\ntotal_frames = 10000\nnet_size = \"full\"\n").unwrap();
        assert_eq!(cfg.actors, 2);
        assert_eq!(cfg.total_frames, 10_000);
        assert_eq!(cfg.net_size, NetSize::Full);
        assert_eq!(cfg.batch_size, 512);
        assert_eq!(TrainConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(TrainConfig::from_toml("epsilon = 1.5").is_err());
        assert!(TrainConfig::from_toml("batch_size = 100\nbuffer_capacity = 10").is_err());
        assert!(TrainConfig::from_toml("optimizer = \"rmsprop\"").is_err());
        assert!(TrainConfig::from_toml("no_such_key = 1").is_err());
    }

    #[test]
    fn linear_decay() {
        let e = ExplorationConfig { epsilon: 0.5, epsilon_final: Some(0.1), decay_frames: 100 };
        assert_eq!(e.at(0), 0.5);
        assert!((e.at(50) - 0.3).abs() < 1e-12);
        assert!((e.at(1000) - 0.1).abs() < 1e-12);
        assert_eq!(ExplorationConfig::constant(0.2).at(1 << 40), 0.2);
    }
}
