//! Players for evaluation: trained checkpoints and simple baselines.

use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

use ddz_core::policy::{self, detect_reward_factors};
use ddz_core::{Action, BidState, CardMultiset, PlayState, PolicyConfig, PolicyMode, Rank, RewardFactors};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TrainError};
use crate::netset::NetSet;

pub trait Agent: Send + Sync {
    fn bid(&self, state: &BidState, rng: &mut ChaCha8Rng) -> Result<u8>;

    /// Index into `legal`, which is never empty.
    fn play(&self, state: &PlayState, legal: &[Action], rng: &mut ChaCha8Rng) -> Result<usize>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct UniformRandom;

impl Agent for UniformRandom {
    fn bid(&self, state: &BidState, rng: &mut ChaCha8Rng) -> Result<u8> {
        Ok(*state.valid_bids().choose(rng).expect("pass is always valid"))
    }

    fn play(&self, _state: &PlayState, legal: &[Action], rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(rng.random_range(0..legal.len()))
    }
}

/// Plays out the hand greedily: go out when possible, lead the longest
/// non-bomb combination, follow with the cheapest beating move, never beat a
/// teammate, and bomb only when an opponent is close to going out.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyRule;

const BOMB_WHEN_OPPONENT_HOLDS: usize = 4;

impl GreedyRule {
    fn choose(state: &PlayState, legal: &[Action]) -> usize {
        let me = state.to_act;
        let hand_size = state.hand(me).total();
        if let Some(i) = legal.iter().position(|a| a.num_cards() == hand_size) {
            return i;
        }
        let plain = |a: &Action| !a.is_pass() && !a.is_bomb_like();
        match state.lead_role() {
            None => legal
                .iter()
                .enumerate()
                .filter(|(_, a)| plain(a))
                .max_by_key(|(i, a)| (a.num_cards(), std::cmp::Reverse(a.principal), std::cmp::Reverse(*i)))
                .map_or(0, |(i, _)| i),
            Some(leader) => {
                if me.is_peasant() && leader.is_peasant() {
                    return 0;
                }
                if let Some(i) = legal.iter().position(plain) {
                    return i;
                }
                let danger = ddz_core::Role::ALL
                    .iter()
                    .filter(|&&r| r != me && (me.is_peasant() != r.is_peasant()))
                    .any(|&r| state.hand(r).total() <= BOMB_WHEN_OPPONENT_HOLDS);
                if danger {
                    legal.iter().position(|a| a.is_bomb_like()).unwrap_or(0)
                } else {
                    0
                }
            }
        }
    }
}

impl Agent for GreedyRule {
    fn bid(&self, state: &BidState, _rng: &mut ChaCha8Rng) -> Result<u8> {
        Ok(ScriptedBidder::default().decide(state))
    }

    fn play(&self, state: &PlayState, legal: &[Action], _rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(GreedyRule::choose(state, legal))
    }
}

/// Fixed-threshold bidder over a hand-strength score; plays like [`GreedyRule`].
///
/// Raw points: rocket 4, each bomb 3, each 2 one point, each ace half a
/// point, a lone black joker 1.5 and a lone red joker 2. The score is
/// `(raw − 4) / 10`; a score above `thresholds[k]` asks for `k + 1` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBidder {
    pub thresholds: [f64; 3],
}

impl Default for ScriptedBidder {
    fn default() -> Self {
        ScriptedBidder { thresholds: [-0.1, 0.0, 0.1] }
    }
}

impl ScriptedBidder {
    pub fn always_pass() -> Self {
        ScriptedBidder { thresholds: [f64::MAX; 3] }
    }

    pub fn raw_points(hand: &CardMultiset) -> f64 {
        let b = hand.count(Rank::BLACK_JOKER) == 1;
        let r = hand.count(Rank::RED_JOKER) == 1;
        let mut raw = match (b, r) {
            (true, true) => 4.0,
            (true, false) => 1.5,
            (false, true) => 2.0,
            (false, false) => 0.0,
        };
        raw += 3.0 * (0..13).filter(|&i| hand.counts()[i] == 4).count() as f64;
        raw += f64::from(hand.count(Rank::TWO));
        raw += 0.5 * f64::from(hand.count(Rank::ACE));
        raw
    }

    pub fn score(hand: &CardMultiset) -> f64 {
        (ScriptedBidder::raw_points(hand) - 4.0) / 10.0
    }

    /// Desired bid before the must-exceed rule.
    pub fn desired(&self, hand: &CardMultiset) -> u8 {
        let h = ScriptedBidder::score(hand);
        self.thresholds.iter().filter(|&&t| h > t).count() as u8
    }

    pub fn decide(&self, state: &BidState) -> u8 {
        let want = self.desired(state.hand_to_act());
        if want > state.max_bid() {
            want
        } else {
            0
        }
    }
}

impl Agent for ScriptedBidder {
    fn bid(&self, state: &BidState, _rng: &mut ChaCha8Rng) -> Result<u8> {
        Ok(self.decide(state))
    }

    fn play(&self, state: &PlayState, legal: &[Action], _rng: &mut ChaCha8Rng) -> Result<usize> {
        Ok(GreedyRule::choose(state, legal))
    }
}

/// Greedy play from trained networks under a selection rule.
#[derive(Debug, Clone)]
pub struct NetAgent {
    pub nets: NetSet,
    pub policy: PolicyConfig,
}

impl Agent for NetAgent {
    fn bid(&self, state: &BidState, _rng: &mut ChaCha8Rng) -> Result<u8> {
        let eval = self.nets.evaluate_bid(state)?;
        let i = policy::select(&eval.estimates, &RewardFactors::BIDDING, &self.policy)?;
        Ok(eval.bids[i])
    }

    fn play(&self, state: &PlayState, legal: &[Action], _rng: &mut ChaCha8Rng) -> Result<usize> {
        if legal.len() == 1 {
            return Ok(0);
        }
        let eval = self.nets.evaluate_candidates(state, legal.to_vec())?;
        let factors = detect_reward_factors(state, state.to_act);
        Ok(policy::select(&eval.estimates, &factors, &self.policy)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentKind {
    Checkpoint { path: PathBuf, policy: PolicyConfig },
    UniformRandom,
    ScriptedBidder { thresholds: [f64; 3] },
    GreedyRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub kind: AgentKind,
    pub label: String,
}

/// A ready-to-play agent plus the SHA-256 of its checkpoint file, if any.
#[derive(Clone)]
pub struct BuiltAgent {
    pub agent: Arc<dyn Agent>,
    pub checkpoint_hash: Option<String>,
}

impl fmt::Debug for BuiltAgent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BuiltAgent").field("checkpoint_hash", &self.checkpoint_hash).finish()
    }
}

pub fn file_sha256(path: &std::path::Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

impl AgentSpec {
    pub fn new(kind: AgentKind, label: impl Into<String>) -> Self {
        AgentSpec { kind, label: label.into() }
    }

    pub fn random() -> Self {
        AgentSpec::new(AgentKind::UniformRandom, "random")
    }

    pub fn greedy() -> Self {
        AgentSpec::new(AgentKind::GreedyRule, "greedy")
    }

    pub fn scripted(bidder: ScriptedBidder) -> Self {
        AgentSpec::new(AgentKind::ScriptedBidder { thresholds: bidder.thresholds }, "scripted")
    }

    pub fn checkpoint(path: impl Into<PathBuf>, policy: PolicyConfig) -> Self {
        let path = path.into();
        let label = format!("{}@{}", policy.mode, path.display());
        AgentSpec::new(AgentKind::Checkpoint { path, policy }, label)
    }

    pub fn build(&self) -> Result<BuiltAgent> {
        Ok(match &self.kind {
            AgentKind::UniformRandom => BuiltAgent { agent: Arc::new(UniformRandom), checkpoint_hash: None },
            AgentKind::GreedyRule => BuiltAgent { agent: Arc::new(GreedyRule), checkpoint_hash: None },
            AgentKind::ScriptedBidder { thresholds } => BuiltAgent {
                agent: Arc::new(ScriptedBidder { thresholds: *thresholds }),
                checkpoint_hash: None,
            },
            AgentKind::Checkpoint { path, policy } => BuiltAgent {
                agent: Arc::new(NetAgent { nets: NetSet::load(path)?, policy: *policy }),
                checkpoint_hash: Some(file_sha256(path)?),
            },
        })
    }
}

impl std::str::FromStr for AgentSpec {
    type Err = TrainError;

    /// `random`, `greedy`, `scripted`, `scripted:t1,t2,t3`, `pass`, or a
    /// checkpoint path optionally followed by `@Mode`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "random" => AgentSpec::random(),
            "greedy" => AgentSpec::greedy(),
            "scripted" => AgentSpec::scripted(ScriptedBidder::default()),
            "pass" => AgentSpec::new(
                AgentKind::ScriptedBidder { thresholds: ScriptedBidder::always_pass().thresholds },
                "pass",
            ),
            _ if s.starts_with("scripted:") => {
                let t: Vec<f64> = s["scripted:".len()..]
                    .split(',')
                    .map(|v| v.trim().parse().map_err(|_| TrainError::Config(format!("bad threshold in \"{s}\""))))
                    .collect::<Result<_>>()?;
                let thresholds: [f64; 3] =
                    t.try_into().map_err(|_| TrainError::Config("scripted needs three thresholds".into()))?;
                AgentSpec::new(AgentKind::ScriptedBidder { thresholds }, s)
            }
            _ => {
                let (path, mode) = match s.rsplit_once('@') {
                    Some((p, m)) => (p, m.parse::<PolicyMode>()?),
                    None => (s, PolicyMode::AlphaDou),
                };
                if path.is_empty() {
                    return Err(TrainError::Config("empty agent spec".into()));
                }
                AgentSpec::checkpoint(path, PolicyConfig::with_mode(mode))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddz_core::actions::legal_actions;
    use ddz_core::{Deal, TrickContext};

    fn hand(s: &str) -> CardMultiset {
        s.parse().unwrap()
    }

    #[test]
    fn heuristic_table() {
        assert_eq!(ScriptedBidder::raw_points(&hand("BR22")), 6.0);
        assert_eq!(ScriptedBidder::raw_points(&hand("3333AA2")), 5.0);
        assert_eq!(ScriptedBidder::raw_points(&hand("B")), 1.5);
        assert_eq!(ScriptedBidder::raw_points(&hand("R")), 2.0);
        let b = ScriptedBidder::default();
        assert_eq!(b.desired(&hand("BR22345678")), 3);
        assert_eq!(b.desired(&hand("333444569TTJJQKK2")), 0);
        assert!(ScriptedBidder::score(&hand("333444569TTJJQKK2")) < -0.1);
    }

    #[test]
    fn scripted_respects_must_exceed() {
        let deal = Deal::from_seed(3);
        let mut state = BidState::new(deal);
        state.bids = vec![3];
        let b = ScriptedBidder { thresholds: [-10.0; 3] };
        // max bid already 3: the auction is over, but the rule still yields pass
        assert_eq!(b.decide(&state), 0);
        state.bids = vec![2];
        assert_eq!(b.decide(&state), 3);
        assert_eq!(ScriptedBidder::always_pass().decide(&BidState::new(Deal::from_seed(1))), 0);
    }

    #[test]
    fn greedy_goes_out_and_respects_teammates() {
        let mut state = PlayState::new(Deal::from_seed(1), 0, [3, -1, -1]);
        state.hands[0] = hand("55");
        let legal = legal_actions(&state.hands[0], &TrickContext::leading());
        assert_eq!(legal[GreedyRule::choose(&state, &legal)].cards, hand("55"));

        // Peasant-down beat the landlord's lead: peasant-up lets it stand.
        let mut state = PlayState::new(Deal::from_seed(1), 0, [3, -1, -1]);
        let lead = legal_actions(&state.hands[0], &TrickContext::leading())[0];
        state.play(lead).unwrap();
        let follow = state.legal_actions();
        if let Some(beat) = follow.iter().find(|a| !a.is_pass()) {
            state.play(*beat).unwrap();
            let legal = state.legal_actions();
            assert!(legal[GreedyRule::choose(&state, &legal)].is_pass());
        }
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("random".parse::<AgentSpec>().unwrap(), AgentSpec::random());
        let s: AgentSpec = "runs/a.ckpt@MaxQ".parse().unwrap();
        assert!(matches!(s.kind, AgentKind::Checkpoint { ref policy, .. } if policy.mode == PolicyMode::MaxQ));
        let s: AgentSpec = "scripted:0,0.5,1".parse().unwrap();
        assert_eq!(s.kind, AgentKind::ScriptedBidder { thresholds: [0.0, 0.5, 1.0] });
        assert!("scripted:1".parse::<AgentSpec>().is_err());
    }
}
