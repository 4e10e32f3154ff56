use std::sync::Arc;

use ddz_core::encoding::{self, BidObservation, PlayObservation};
use ddz_core::{Action, BidState, PerActionEstimate, PlayState};
use ddz_model::{Checkpoint, Input, NetConfig, Network, ParameterSnapshot, Position};

use crate::error::{Result, TrainError};

/// The six position networks, one snapshot each.
#[derive(Debug, Clone)]
pub struct NetSet {
    nets: Vec<ParameterSnapshot>,
}

pub struct BidEvaluation {
    pub bids: Vec<u8>,
    pub estimates: Vec<PerActionEstimate>,
    pub observation: BidObservation,
}

pub struct PlayEvaluation {
    pub actions: Vec<Action>,
    pub estimates: Vec<PerActionEstimate>,
    pub observation: PlayObservation,
}

impl NetSet {
    /// Freshly initialised networks; position `i` is seeded with `seed + i`.
    pub fn random(card: &NetConfig, bid: &NetConfig, seed: u64) -> Result<NetSet> {
        let nets = Position::ALL
            .into_iter()
            .map(|p| {
                let cfg = match p.kind() {
                    ddz_model::NetKind::Card => card.clone(),
                    ddz_model::NetKind::Bid => bid.clone(),
                };
                Ok(Arc::new(Network::new(cfg, p, seed.wrapping_add(p.index() as u64))?))
            })
            .collect::<Result<_>>()?;
        Ok(NetSet { nets })
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<NetSet> {
        let nets = Position::ALL
            .into_iter()
            .map(|p| ck.get(p).cloned().map(Arc::new).ok_or(TrainError::MissingNetwork(p)))
            .collect::<Result<_>>()?;
        Ok(NetSet { nets })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<NetSet> {
        NetSet::from_checkpoint(&Checkpoint::load(path)?)
    }

    pub fn to_checkpoint(&self, frames: u64) -> Checkpoint {
        Checkpoint::new(frames, self.nets.iter().map(|n| (**n).clone()).collect())
    }

    pub fn net(&self, position: Position) -> &ParameterSnapshot {
        &self.nets[position.index()]
    }

    pub fn replace(&mut self, snapshot: ParameterSnapshot) {
        let i = snapshot.position().index();
        self.nets[i] = snapshot;
    }

    pub fn evaluate_bid(&self, state: &BidState) -> Result<BidEvaluation> {
        let (observation, bids) = encoding::encode_bid(state)?;
        let net = self.net(Position::bidder(state.bids.len()));
        let estimates = net.forward(&Input::from(&observation))?;
        Ok(BidEvaluation { bids, estimates, observation })
    }

    pub fn evaluate_play(&self, state: &PlayState) -> Result<PlayEvaluation> {
        let actions = state.legal_actions();
        self.evaluate_candidates(state, actions)
    }

    pub fn evaluate_candidates(&self, state: &PlayState, actions: Vec<Action>) -> Result<PlayEvaluation> {
        let observation = encoding::encode_play(state, &actions)?;
        let net = self.net(Position::from_role(state.to_act));
        let estimates = net.forward(&Input::from(&observation))?;
        Ok(PlayEvaluation { actions, estimates, observation })
    }
}
