//! Rules engine and feature pipeline for three-player Doudizhu with bidding.
//!
//! The crate is organised bottom-up:
//!
//! * [`cards`] – ranks, card multisets, deals and the 54-wide card encoding.
//! * [`actions`] – the full action taxonomy, enumeration, legality and `beats`.
//! * [`game`] – the bidding and cardplay state machine with both scoring rules.
//! * [`record`] – text and JSON game logs.
//! * [`encoding`] – per-candidate observation tensors for the bid and play nets.
//! * [`policy`] – turning `(p, Q_w, Q_l)` estimates into a move.

pub mod actions;
pub mod cards;
pub mod encoding;
pub mod error;
pub mod game;
pub mod policy;
pub mod record;

pub use actions::{Action, Category, TrickContext};
pub use cards::{CardMultiset, Deal, Rank};
pub use error::{Error, Result};
pub use game::{BidState, GameOutcome, GameResult, GameState, PlayState, Role};
pub use policy::{PerActionEstimate, PolicyConfig, PolicyMode, RewardFactors};
pub use record::{GameRecord, RecordedGame};
