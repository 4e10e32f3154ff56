//! Per-candidate estimates for one position, shared by `ddz inspect` and the
//! service's evaluation endpoint.

use ddz_core::policy::{self, cut_set, detect_reward_factors};
use ddz_core::{CardMultiset, Deal, GameRecord, GameState, PolicyConfig, Rank, RewardFactors};
use ddz_train::NetSet;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvaluation {
    /// Card text, `Pass`, or the bid as a digit during the auction.
    pub action: String,
    pub p_w: f64,
    pub q_w: f64,
    pub q_l: f64,
    pub q: f64,
    pub in_a_cut: bool,
    pub chosen: bool,
}

/// Estimates for every legal option of the seat to act; `None` once the
/// game is over.
pub fn evaluate(nets: &NetSet, state: &GameState, policy: &PolicyConfig) -> anyhow::Result<Option<Vec<ActionEvaluation>>> {
    let (labels, estimates, factors) = match state {
        GameState::Finished(_) => return Ok(None),
        GameState::Bidding(b) => {
            let e = nets.evaluate_bid(b)?;
            (e.bids.iter().map(u8::to_string).collect::<Vec<_>>(), e.estimates, RewardFactors::BIDDING)
        }
        GameState::Playing(p) => {
            let e = nets.evaluate_play(p)?;
            let factors = detect_reward_factors(p, p.to_act);
            (e.actions.iter().map(ToString::to_string).collect(), e.estimates, factors)
        }
    };
    let cut = cut_set(&estimates, policy);
    let chosen = policy::select(&estimates, &factors, policy)?;
    Ok(Some(
        estimates
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (e, action))| ActionEvaluation {
                action,
                p_w: e.p_w(),
                q_w: e.q_w,
                q_l: e.q_l,
                q: e.q(),
                in_a_cut: cut[i],
                chosen: i == chosen,
            })
            .collect(),
    ))
}

/// A deal from `seed` with some seats' hands fixed. The other cards are
/// shuffled by `seed` and dealt to the remaining seats and the kitty.
pub fn deal_with_hands(seed: u64, fixed: &[(usize, CardMultiset)]) -> anyhow::Result<Deal> {
    if fixed.is_empty() {
        return Ok(Deal::from_seed(seed));
    }
    let mut rest = CardMultiset::full_deck();
    let mut hands = [CardMultiset::empty(); 3];
    let mut taken = [false; 3];
    for (seat, hand) in fixed {
        anyhow::ensure!(*seat < 3, "seat {seat} out of range");
        anyhow::ensure!(hand.total() == 17, "hand{seat} has {} cards, want 17", hand.total());
        anyhow::ensure!(!taken[*seat], "hand{seat} given twice");
        rest = rest.checked_sub(hand).ok_or_else(|| anyhow::anyhow!("fixed hands use a card twice"))?;
        hands[*seat] = *hand;
        taken[*seat] = true;
    }
    let mut deck: Vec<Rank> = rest.iter_ranks().flat_map(|(r, n)| std::iter::repeat_n(r, n as usize)).collect();
    deck.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut cards = deck.into_iter();
    for seat in (0..3).filter(|&s| !taken[s]) {
        for r in cards.by_ref().take(17) {
            hands[seat].add_rank(r, 1);
        }
    }
    let mut landlord_cards = CardMultiset::empty();
    for r in cards {
        landlord_cards.add_rank(r, 1);
    }
    Ok(Deal { hands, landlord_cards, seed })
}

/// A game record in the log format, optionally with `hand0:`..`hand2:`
/// lines fixing seats' hands, replayed to the position it describes.
pub fn parse_state_file(text: &str) -> anyhow::Result<GameState> {
    let mut fixed = Vec::new();
    let mut record_lines = Vec::new();
    for line in text.lines() {
        let hand = line.trim().strip_prefix("hand").and_then(|rest| {
            let (seat, cards) = rest.split_once(':')?;
            Some((seat.trim().parse::<usize>().ok()?, cards.trim()))
        });
        match hand {
            Some((seat, cards)) => fixed.push((seat, cards.parse::<CardMultiset>()?)),
            None => record_lines.push(line),
        }
    }
    let record: GameRecord = record_lines.join("\n").parse()?;
    let deal = deal_with_hands(record.seed, &fixed)?;
    Ok(record.replay_from(deal)?)
}

pub fn render(evals: &[ActionEvaluation]) -> String {
    let mut out = format!("{:<22}{:>8}{:>9}{:>9}{:>9}  cut  chosen\n", "action", "p_w", "Q_w", "Q_l", "Q");
    for e in evals {
        out.push_str(&format!(
            "{:<22}{:>8.3}{:>9.3}{:>9.3}{:>9.3}  {:<3}  {}\n",
            e.action,
            e.p_w,
            e.q_w,
            e.q_l,
            e.q,
            if e.in_a_cut { "yes" } else { "" },
            if e.chosen { "*" } else { "" }
        ));
    }
    out
}
