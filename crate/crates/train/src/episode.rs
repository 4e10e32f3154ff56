//! One self-play game under ε-greedy exploration.

use ddz_core::encoding::{encode_bid, encode_play};
use ddz_core::game::BidStep;
use ddz_core::policy::{self, detect_reward_factors};
use ddz_core::{BidState, Deal, GameOutcome, GameRecord, PolicyConfig, RewardFactors, Role};
use ddz_model::{Input, Position, Target};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::netset::NetSet;

/// One visited `(state, action)` pair. Observation values are stored as
/// `round(3·v)`, which is exact for every value the encoders produce.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub position: Position,
    pub planes: Box<[i8]>,
    pub extra: Box<[i8]>,
    pub target: Target,
}

fn quantize(values: &[f32]) -> Box<[i8]> {
    values.iter().map(|v| (v * 3.0).round() as i8).collect()
}

fn dequantize(q: &[i8], out: &mut Vec<f32>) {
    out.extend(q.iter().map(|&v| f32::from(v) / 3.0));
}

impl Transition {
    pub fn planes_f32(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.planes.len());
        dequantize(&self.planes, &mut v);
        v
    }
}

/// Decoded network inputs and targets for a training batch.
pub struct Assembled {
    pub n: usize,
    pub planes: Vec<f32>,
    pub extra: Vec<f32>,
    pub targets: Vec<Target>,
}

impl Assembled {
    pub fn new(batch: &[Transition]) -> Assembled {
        let mut planes = Vec::with_capacity(batch.iter().map(|t| t.planes.len()).sum());
        let mut extra = Vec::new();
        for t in batch {
            dequantize(&t.planes, &mut planes);
            dequantize(&t.extra, &mut extra);
        }
        Assembled { n: batch.len(), planes, extra, targets: batch.iter().map(|t| t.target).collect() }
    }

    pub fn input(&self) -> Input<'_> {
        Input { n: self.n, planes: &self.planes, extra: &self.extra }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub epsilon: f64,
    pub policy: PolicyConfig,
    /// Multiplies the per-role score to give the regression target.
    pub reward_scale: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { epsilon: 0.1, policy: PolicyConfig::default(), reward_scale: 0.125 }
    }
}

/// With probability `epsilon` a uniform index, otherwise `greedy()`.
pub fn explore_or(
    n: usize,
    epsilon: f64,
    rng: &mut ChaCha8Rng,
    greedy: impl FnOnce() -> Result<usize>,
) -> Result<usize> {
    if n == 1 {
        return Ok(0);
    }
    if rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..n))
    } else {
        greedy()
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub transitions: Vec<Transition>,
    /// All-pass auctions redealt before the decided game.
    pub draws: u32,
    pub record: GameRecord,
    pub outcome: GameOutcome,
}

enum Owner {
    Seat(usize),
    Role(Role),
}

struct Pending {
    owner: Owner,
    position: Position,
    planes: Box<[i8]>,
    extra: Box<[i8]>,
}

/// Plays deals drawn from `seed` until one is not a draw, and returns that
/// game's transitions, every one labelled with its owner's final result.
pub fn play_episode(nets: &NetSet, cfg: &EpisodeConfig, seed: u64) -> Result<Episode> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = 0;
    'deal: loop {
        let deal_seed = rng.random::<u64>();
        let mut record = GameRecord::new(deal_seed);
        let mut pending = Vec::new();
        let mut bidding = BidState::new(Deal::from_seed(deal_seed));

        let mut state = loop {
            let seat = bidding.to_act();
            let position = Position::bidder(seat);
            let (obs, bids) = encode_bid(&bidding)?;
            let i = explore_or(bids.len(), cfg.epsilon, &mut rng, || {
                let est = nets.net(position).forward(&Input::from(&obs))?;
                Ok(policy::select(&est, &RewardFactors::BIDDING, &cfg.policy)?)
            })?;
            pending.push(Pending {
                owner: Owner::Seat(seat),
                position,
                planes: quantize(obs.slice(i)),
                extra: Box::new([]),
            });
            record.bids.push(bids[i]);
            match bidding.step_bid(bids[i])? {
                BidStep::Bidding(next) => bidding = next,
                BidStep::Play(play) => break *play,
                BidStep::Draw(_) => {
                    draws += 1;
                    continue 'deal;
                }
            }
        };

        let outcome = loop {
            let role = state.to_act;
            let position = Position::from_role(role);
            let legal = state.legal_actions();
            let obs = encode_play(&state, &legal)?;
            let i = explore_or(legal.len(), cfg.epsilon, &mut rng, || {
                let est = nets.net(position).forward(&Input::from(&obs))?;
                let factors = detect_reward_factors(&state, role);
                Ok(policy::select(&est, &factors, &cfg.policy)?)
            })?;
            pending.push(Pending {
                owner: Owner::Role(role),
                position,
                planes: quantize(obs.slice_a(i)),
                extra: quantize(obs.slice_b(i)),
            });
            record.plays.push((role, legal[i]));
            if let Some(outcome) = state.play(legal[i])? {
                break outcome;
            }
        };

        let scores = outcome.adp2_scores.expect("decided game has scores");
        let transitions = pending
            .into_iter()
            .map(|p| {
                let role = match p.owner {
                    Owner::Seat(s) => outcome.role_of_seat(s).expect("decided game has a landlord"),
                    Owner::Role(r) => r,
                };
                Transition {
                    position: p.position,
                    planes: p.planes,
                    extra: p.extra,
                    target: Target {
                        u: outcome.u(role).expect("decided game has outcomes"),
                        r: scores[role.index()] as f64 * cfg.reward_scale,
                    },
                }
            })
            .collect();
        return Ok(Episode { transitions, draws, record, outcome });
    }
}
