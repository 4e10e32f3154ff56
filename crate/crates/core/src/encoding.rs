//! Observation tensors, one slice per candidate move.
//!
//! Bid slices are `5 × 54`:
//!
//! | row | content |
//! |-----|---------|
//! | 0 | candidate bid (0..=3) repeated |
//! | 1 | own hand |
//! | 2..=4 | bids of seats 0, 1, 2 repeated, `-1` when not called yet |
//!
//! Play slices are `72 × 54` (part a) plus an 18-wide vector (part b):
//!
//! | row | content |
//! |-----|---------|
//! | 0 | candidate action |
//! | 1 | cards left: one-hot landlord (20) ++ landlord_up (17) ++ landlord_down (17) |
//! | 2 | own hand |
//! | 3 | the other two hands combined |
//! | 4 | face-up landlord cards the landlord has not played yet |
//! | 5..=7 | cards played by landlord, landlord_up, landlord_down |
//! | 8..=10 | bids of seats 0, 1, 2 divided by 3 (`-1` kept) |
//! | 11 | spring or anti-spring still achievable |
//! | 12..=71 | last 60 moves oldest first, zero rows in front |
//!
//! Part b is `one_hot(bombs, 15) ++ [bid0, bid1, bid2]` with raw bids.

use std::fmt::Write as _;

use crate::actions::Action;
use crate::cards::{CardMultiset, ENCODING_WIDTH};
use crate::error::{Error, Result};
use crate::game::{BidState, PlayState, Role};

pub const WIDTH: usize = ENCODING_WIDTH;
pub const BID_ROWS: usize = 5;
pub const PLAY_ROWS: usize = 72;
pub const HISTORY_ROWS: usize = 60;
pub const PART_B_WIDTH: usize = 18;
pub const BOMB_ONE_HOT: usize = 15;

pub const BID_SLICE: usize = BID_ROWS * WIDTH;
pub const PLAY_SLICE: usize = PLAY_ROWS * WIDTH;

#[derive(Debug, Clone, PartialEq)]
pub struct BidObservation {
    pub batch: usize,
    /// `batch × 5 × 54`, row-major.
    pub data: Vec<f32>,
}

impl BidObservation {
    pub fn slice(&self, i: usize) -> &[f32] {
        &self.data[i * BID_SLICE..(i + 1) * BID_SLICE]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayObservation {
    pub batch: usize,
    /// `batch × 72 × 54`, row-major.
    pub part_a: Vec<f32>,
    /// `batch × 18`.
    pub part_b: Vec<f32>,
}

impl PlayObservation {
    pub fn slice_a(&self, i: usize) -> &[f32] {
        &self.part_a[i * PLAY_SLICE..(i + 1) * PLAY_SLICE]
    }

    pub fn slice_b(&self, i: usize) -> &[f32] {
        &self.part_b[i * PART_B_WIDTH..(i + 1) * PART_B_WIDTH]
    }
}

fn fill(row: &mut [f32], v: f32) {
    row.iter_mut().for_each(|x| *x = v);
}

/// One slice per valid bid, ascending. Returns the aligned bid list.
pub fn encode_bid(state: &BidState) -> Result<(BidObservation, Vec<u8>)> {
    if state.bids.len() >= 3 || state.max_bid() == crate::game::MAX_BID {
        return Err(Error::AuctionFinished);
    }
    let bids = state.valid_bids();
    let mut shared = [0f32; BID_SLICE];
    state.hand_to_act().write_encode54(&mut shared[WIDTH..2 * WIDTH]);
    for (seat, b) in state.bids_by_seat().iter().enumerate() {
        let row = 2 + seat;
        fill(&mut shared[row * WIDTH..(row + 1) * WIDTH], f32::from(*b));
    }
    let mut data = Vec::with_capacity(bids.len() * BID_SLICE);
    for &bid in &bids {
        let start = data.len();
        data.extend_from_slice(&shared);
        fill(&mut data[start..start + WIDTH], f32::from(bid));
    }
    Ok((BidObservation { batch: bids.len(), data }, bids))
}

fn one_hot_into(row: &mut [f32], count: usize) {
    if count > 0 && count <= row.len() {
        row[count - 1] = 1.0;
    }
}

/// Rows 1..72 of a play slice: everything except the candidate action.
fn play_context(state: &PlayState) -> Vec<f32> {
    let me = state.to_act;
    let mut ctx = vec![0f32; PLAY_SLICE];
    let row = |i: usize| i * WIDTH..(i + 1) * WIDTH;

    {
        let r = &mut ctx[row(1)];
        one_hot_into(&mut r[0..20], state.hand(Role::Landlord).total());
        one_hot_into(&mut r[20..37], state.hand(Role::PeasantUp).total());
        one_hot_into(&mut r[37..54], state.hand(Role::PeasantDown).total());
    }
    state.hand(me).write_encode54(&mut ctx[row(2)]);
    let others = Role::ALL
        .iter()
        .filter(|&&r| r != me)
        .fold(CardMultiset::empty(), |acc, &r| acc + *state.hand(r));
    others.write_encode54(&mut ctx[row(3)]);
    state
        .landlord_cards
        .saturating_sub(&state.played[Role::Landlord.index()])
        .write_encode54(&mut ctx[row(4)]);
    state.played[Role::Landlord.index()].write_encode54(&mut ctx[row(5)]);
    state.played[Role::PeasantUp.index()].write_encode54(&mut ctx[row(6)]);
    state.played[Role::PeasantDown.index()].write_encode54(&mut ctx[row(7)]);
    for (seat, &b) in state.bids_by_seat.iter().enumerate() {
        let v = if b < 0 { -1.0 } else { f32::from(b) / 3.0 };
        fill(&mut ctx[row(8 + seat)], v);
    }
    if state.spring_possible() || state.anti_spring_possible() {
        fill(&mut ctx[row(11)], 1.0);
    }
    let recent = &state.history[state.history.len().saturating_sub(HISTORY_ROWS)..];
    let first = 12 + HISTORY_ROWS - recent.len();
    for (k, (_, action)) in recent.iter().enumerate() {
        action.cards.write_encode54(&mut ctx[row(first + k)]);
    }
    ctx
}

/// The 18-wide part b for the current state.
pub fn part_b(state: &PlayState) -> [f32; PART_B_WIDTH] {
    let mut out = [0f32; PART_B_WIDTH];
    out[(state.bomb_count as usize).min(BOMB_ONE_HOT - 1)] = 1.0;
    for (seat, &b) in state.bids_by_seat.iter().enumerate() {
        out[BOMB_ONE_HOT + seat] = f32::from(b);
    }
    out
}

/// One slice per candidate, from the perspective of the role to act.
pub fn encode_play(state: &PlayState, candidates: &[Action]) -> Result<PlayObservation> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let ctx = play_context(state);
    let b = part_b(state);
    let mut part_a = Vec::with_capacity(candidates.len() * PLAY_SLICE);
    let mut part_b_all = Vec::with_capacity(candidates.len() * PART_B_WIDTH);
    for action in candidates {
        let start = part_a.len();
        part_a.extend_from_slice(&ctx);
        action.cards.write_encode54(&mut part_a[start..start + WIDTH]);
        part_b_all.extend_from_slice(&b);
    }
    Ok(PlayObservation { batch: candidates.len(), part_a, part_b: part_b_all })
}

fn cell(v: f32) -> char {
    match v {
        v if v == 0.0 => '.',
        v if v == 1.0 => '1',
        v if v == -1.0 => '-',
        v if (v - 1.0 / 3.0).abs() < 1e-6 => 'a',
        v if (v - 2.0 / 3.0).abs() < 1e-6 => 'b',
        v if v == 2.0 => '2',
        v if v == 3.0 => '3',
        _ => '?',
    }
}

/// Text grid of a `rows × 54` slice for fixture diffs: `.` 0, `1` 1, `-` -1,
/// `a` 1/3, `b` 2/3, `2`/`3` raw bid values.
pub fn render_grid(slice: &[f32]) -> String {
    let mut out = String::with_capacity(slice.len() + slice.len() / WIDTH * 6);
    for (i, row) in slice.chunks(WIDTH).enumerate() {
        let _ = write!(out, "{i:>2} ");
        out.extend(row.iter().map(|&v| cell(v)));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cards::Deal;
    use crate::game::BidStep;

    fn row(slice: &[f32], i: usize) -> &[f32] {
        &slice[i * WIDTH..(i + 1) * WIDTH]
    }

    #[test]
    fn first_bidder_sees_four_slices() {
        let state = BidState::new(Deal::from_seed(1));
        let (obs, bids) = encode_bid(&state).unwrap();
        assert_eq!(bids, vec![0, 1, 2, 3]);
        assert_eq!(obs.batch, 4);
        assert_eq!(obs.data.len(), 4 * 5 * 54);
        for (i, &b) in bids.iter().enumerate() {
            let s = obs.slice(i);
            assert!(row(s, 0).iter().all(|&v| v == b as f32));
            assert_eq!(row(s, 1), &state.deal.hands[0].encode54()[..]);
            for r in 2..5 {
                assert!(row(s, r).iter().all(|&v| v == -1.0));
            }
        }
    }

    #[test]
    fn third_bidder_after_one_two() {
        let mut state = BidState::new(Deal::from_seed(2));
        for b in [1, 2] {
            let BidStep::Bidding(next) = state.step_bid(b).unwrap() else { panic!() };
            state = next;
        }
        let (obs, bids) = encode_bid(&state).unwrap();
        assert_eq!(bids, vec![0, 3]);
        assert_eq!(obs.batch, 2);
        let s = obs.slice(1);
        assert!(row(s, 2).iter().all(|&v| v == 1.0));
        assert!(row(s, 3).iter().all(|&v| v == 2.0));
        assert!(row(s, 4).iter().all(|&v| v == -1.0));
    }

    #[test]
    fn opening_play_slice() {
        let state = PlayState::new(Deal::from_seed(3), 0, [3, -1, -1]);
        let legal = state.legal_actions();
        let obs = encode_play(&state, &legal).unwrap();
        assert_eq!(obs.part_a.len(), legal.len() * 72 * 54);
        assert_eq!(obs.part_b.len(), legal.len() * 18);
        let s = obs.slice_a(0);
        let cards_left = row(s, 1);
        let set: Vec<usize> = (0..54).filter(|&i| cards_left[i] == 1.0).collect();
        assert_eq!(set, vec![19, 20 + 16, 37 + 16]);
        for r in 12..72 {
            assert!(row(s, r).iter().all(|&v| v == 0.0));
        }
        assert!(row(s, 8).iter().all(|&v| v == 1.0));
        assert!(row(s, 9).iter().all(|&v| v == -1.0));
        assert!(row(s, 10).iter().all(|&v| v == -1.0));
        assert!(row(s, 11).iter().all(|&v| v == 1.0));
        assert_eq!(row(s, 4), &state.landlord_cards.encode54()[..]);
        assert_eq!(&obs.slice_b(0)[..3], &[1.0, 0.0, 0.0]);
        assert_eq!(&obs.slice_b(0)[15..], &[3.0, -1.0, -1.0]);
    }

    #[test]
    fn bomb_count_one_hot() {
        let mut state = PlayState::new(Deal::from_seed(4), 1, [0, 2, 0]);
        state.bomb_count = 2;
        let mut expected = [0f32; 18];
        expected[2] = 1.0;
        expected[15] = 0.0;
        expected[16] = 2.0;
        expected[17] = 0.0;
        assert_eq!(part_b(&state), expected);
    }

    #[test]
    fn only_action_row_varies() {
        let state = PlayState::new(Deal::from_seed(5), 2, [1, 2, 3]);
        let legal = state.legal_actions();
        let obs = encode_play(&state, &legal).unwrap();
        let first = obs.slice_a(0);
        for i in 1..obs.batch {
            let s = obs.slice_a(i);
            assert_eq!(&s[WIDTH..], &first[WIDTH..]);
            assert_eq!(row(s, 0), &legal[i].cards.encode54()[..]);
        }
    }

    #[test]
    fn empty_candidates_rejected() {
        let state = PlayState::new(Deal::from_seed(6), 0, [1, 0, 0]);
        assert_eq!(encode_play(&state, &[]), Err(Error::EmptyCandidates));
    }

    #[test]
    fn grid_render() {
        let state = BidState::new(Deal::from_seed(7));
        let (obs, _) = encode_bid(&state).unwrap();
        let text = render_grid(obs.slice(3));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], format!(" 0 {}", "3".repeat(54)));
        assert_eq!(lines[4], format!(" 4 {}", "-".repeat(54)));
    }
}
