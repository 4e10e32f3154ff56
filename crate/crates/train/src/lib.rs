//! Self-play training, baseline agents and the evaluation arena.
//!
//! Actors play full games (auction and cardplay) with ε-greedy exploration
//! and label every decision with the game's final result; the learner
//! regresses each position's `(p, Q_w, Q_l)` onto those labels.

pub mod agents;
pub mod arena;
pub mod buffer;
pub mod config;
pub mod episode;
pub mod error;
pub mod learner;
pub mod netset;

pub use agents::{Agent, AgentKind, AgentSpec, GreedyRule, NetAgent, ScriptedBidder, UniformRandom};
pub use arena::{compute_metrics, run_bid_experiment, run_duplicate_match, DuplicateConfig, MatchReport, Metrics, Subject};
pub use buffer::TrajectoryBuffer;
pub use config::{ExplorationConfig, NetSize, TrainConfig};
pub use episode::{play_episode, EpisodeConfig, Transition};
pub use error::{Result, TrainError};
pub use learner::{run_training, TrainingSummary};
pub use netset::NetSet;
