//! Move selection from per-candidate `(p, Q_w, Q_l)` estimates.
//!
//! The combined value is `Q = p_w·Q_w + (1 − p_w)·Q_l` with `p_w = (p + 1)/2`.
//! When no bomb can still be played and no spring bonus is reachable the
//! outcome's magnitude is fixed, so the policy picks the most likely win.
//! Otherwise it keeps the moves whose `Q` lies within a relative band `rho`
//! of the best `Q` and picks the most likely win among those.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cards::{CardMultiset, Rank, NUM_SUITED_RANKS};
use crate::error::{Error, Result};
use crate::game::{PlayState, Role};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerActionEstimate {
    /// Raw win signal in `[-1, 1]`.
    pub p: f64,
    pub q_w: f64,
    pub q_l: f64,
}

impl PerActionEstimate {
    pub fn new(p: f64, q_w: f64, q_l: f64) -> Self {
        PerActionEstimate { p, q_w, q_l }
    }

    /// Builds an estimate from a win probability rather than the raw `p`.
    pub fn from_win_rate(p_w: f64, q_w: f64, q_l: f64) -> Self {
        PerActionEstimate { p: 2.0 * p_w - 1.0, q_w, q_l }
    }

    pub fn p_w(&self) -> f64 {
        (self.p + 1.0) / 2.0
    }

    pub fn q(&self) -> f64 {
        let pw = self.p_w();
        pw * self.q_w + (1.0 - pw) * self.q_l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyMode {
    MaxQ,
    MaxWP,
    BombCheck,
    Mix,
    BombCheckAndMix,
    AlphaDou,
}

impl PolicyMode {
    pub const ALL: [PolicyMode; 6] = [
        PolicyMode::MaxQ,
        PolicyMode::MaxWP,
        PolicyMode::BombCheck,
        PolicyMode::Mix,
        PolicyMode::BombCheckAndMix,
        PolicyMode::AlphaDou,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyMode::MaxQ => "MaxQ",
            PolicyMode::MaxWP => "MaxWP",
            PolicyMode::BombCheck => "BombCheck",
            PolicyMode::Mix => "Mix",
            PolicyMode::BombCheckAndMix => "BombCheckAndMix",
            PolicyMode::AlphaDou => "AlphaDou",
        }
    }

    /// Whether the mode prunes with the `rho` band.
    pub fn uses_cut(self) -> bool {
        matches!(self, PolicyMode::Mix | PolicyMode::BombCheckAndMix | PolicyMode::AlphaDou)
    }
}

impl fmt::Display for PolicyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyMode::ALL
            .iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .copied()
            .ok_or_else(|| Error::ActionParse(format!("unknown policy mode \"{s}\"")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub mode: PolicyMode,
    pub rho: f64,
    pub epsilon_guard: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { mode: PolicyMode::AlphaDou, rho: 0.05, epsilon_guard: 1e-6 }
    }
}

impl PolicyConfig {
    pub fn with_mode(mode: PolicyMode) -> Self {
        PolicyConfig { mode, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardFactors {
    pub spring_still_possible: bool,
    pub bombs_possibly_remaining: bool,
}

impl RewardFactors {
    /// During bidding nothing has been played, so every factor is still live.
    pub const BIDDING: RewardFactors =
        RewardFactors { spring_still_possible: true, bombs_possibly_remaining: true };

    pub fn any(&self) -> bool {
        self.spring_still_possible || self.bombs_possibly_remaining
    }
}

/// Reward factors from public information only: cards played so far. Every
/// unplayed card is a candidate, so "possibly remaining" over-approximates.
pub fn detect_reward_factors(state: &PlayState, _viewer: Role) -> RewardFactors {
    let played = state.played.iter().fold(CardMultiset::empty(), |acc, p| acc + *p);
    let unseen = CardMultiset::full_deck() - played;
    let bomb = (0..NUM_SUITED_RANKS).any(|r| unseen.counts()[r] == 4);
    let rocket = unseen.count(Rank::BLACK_JOKER) == 1 && unseen.count(Rank::RED_JOKER) == 1;
    RewardFactors {
        spring_still_possible: state.spring_possible() || state.anti_spring_possible(),
        bombs_possibly_remaining: bomb || rocket,
    }
}

/// Index of the maximum of `key` over `indices`; ties go to the earliest.
fn argmax_by(indices: impl Iterator<Item = usize>, key: impl Fn(usize) -> f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for i in indices {
        let v = key(i);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.expect("non-empty candidate set").0
}

/// Membership mask of the pruned set `{a : |Q(a) − maxQ| / max(|maxQ|, ε) < ρ}`.
pub fn cut_set(estimates: &[PerActionEstimate], cfg: &PolicyConfig) -> Vec<bool> {
    let qs: Vec<f64> = estimates.iter().map(PerActionEstimate::q).collect();
    let max_q = qs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom = max_q.abs().max(cfg.epsilon_guard);
    qs.iter().map(|&q| (q - max_q).abs() / denom < cfg.rho).collect()
}

fn select_max_q(estimates: &[PerActionEstimate]) -> usize {
    argmax_by(0..estimates.len(), |i| estimates[i].q())
}

fn select_max_wp(estimates: &[PerActionEstimate]) -> usize {
    argmax_by(0..estimates.len(), |i| estimates[i].p_w())
}

fn select_mix(estimates: &[PerActionEstimate], cfg: &PolicyConfig) -> usize {
    let cut = cut_set(estimates, cfg);
    if !cut.iter().any(|&c| c) {
        // Only reachable with a non-finite maxQ.
        return select_max_q(estimates);
    }
    argmax_by((0..estimates.len()).filter(|&i| cut[i]), |i| estimates[i].p_w())
}

/// Picks one candidate index according to `cfg.mode`.
pub fn select(
    estimates: &[PerActionEstimate],
    factors: &RewardFactors,
    cfg: &PolicyConfig,
) -> Result<usize> {
    if estimates.is_empty() {
        return Err(Error::EmptyEstimates);
    }
    Ok(match cfg.mode {
        PolicyMode::MaxQ => select_max_q(estimates),
        PolicyMode::MaxWP => select_max_wp(estimates),
        PolicyMode::BombCheck if !factors.any() => select_max_wp(estimates),
        PolicyMode::BombCheck => select_max_q(estimates),
        PolicyMode::Mix => select_mix(estimates, cfg),
        PolicyMode::BombCheckAndMix | PolicyMode::AlphaDou if !factors.any() => {
            select_max_wp(estimates)
        }
        PolicyMode::BombCheckAndMix | PolicyMode::AlphaDou => select_mix(estimates, cfg),
    })
}
