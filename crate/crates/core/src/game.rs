//! Bidding and cardplay state machine.
//!
//! Seats are numbered in bidding order (seat 0 bids first). Once the auction
//! ends, play proceeds seat 0 → 1 → 2 → 0 and the roles are fixed relative
//! to the landlord: [`Role::PeasantDown`] acts right after the landlord and
//! [`Role::PeasantUp`] right before.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::actions::{beats, legal_actions, Action, TrickContext};
use crate::cards::{CardMultiset, Deal};
use crate::error::{Error, Result};

pub const MAX_BID: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Landlord,
    PeasantDown,
    PeasantUp,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Landlord, Role::PeasantDown, Role::PeasantUp];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Role {
        Role::ALL[i % 3]
    }

    pub fn next(self) -> Role {
        Role::from_index(self.index() + 1)
    }

    pub fn is_peasant(self) -> bool {
        self != Role::Landlord
    }

    /// One-letter tag used in game logs: `L`, `D`, `U`.
    pub fn short(self) -> char {
        match self {
            Role::Landlord => 'L',
            Role::PeasantDown => 'D',
            Role::PeasantUp => 'U',
        }
    }

    pub fn from_short(c: char) -> Option<Role> {
        match c.to_ascii_uppercase() {
            'L' => Some(Role::Landlord),
            'D' => Some(Role::PeasantDown),
            'U' => Some(Role::PeasantUp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::Landlord => "landlord",
            Role::PeasantDown => "landlord_down",
            Role::PeasantUp => "landlord_up",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Auction in progress. `bids[i]` is the bid of seat `i` (0 = pass).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidState {
    pub deal: Deal,
    pub bids: Vec<u8>,
}

/// Result of one auction step.
#[derive(Debug, Clone, PartialEq)]
pub enum BidStep {
    Bidding(BidState),
    Play(Box<PlayState>),
    Draw(GameOutcome),
}

impl BidState {
    pub fn new(deal: Deal) -> Self {
        BidState { deal, bids: Vec::new() }
    }

    pub fn to_act(&self) -> usize {
        self.bids.len()
    }

    pub fn max_bid(&self) -> u8 {
        self.bids.iter().copied().max().unwrap_or(0)
    }

    /// Pass plus every bid strictly above the current maximum, ascending.
    pub fn valid_bids(&self) -> Vec<u8> {
        std::iter::once(0).chain(self.max_bid() + 1..=MAX_BID).collect()
    }

    /// Bids as seen by the encoders: `-1` for seats not asked yet.
    pub fn bids_by_seat(&self) -> [i8; 3] {
        let mut out = [-1i8; 3];
        for (i, &b) in self.bids.iter().enumerate() {
            out[i] = b as i8;
        }
        out
    }

    pub fn hand_to_act(&self) -> &CardMultiset {
        &self.deal.hands[self.to_act()]
    }

    pub fn step_bid(&self, bid: u8) -> Result<BidStep> {
        if self.bids.len() >= 3 || self.max_bid() == MAX_BID {
            return Err(Error::AuctionFinished);
        }
        let valid = self.valid_bids();
        if !valid.contains(&bid) {
            return Err(Error::IllegalBid { bid, valid });
        }
        let mut next = self.clone();
        next.bids.push(bid);
        if bid == MAX_BID || next.bids.len() == 3 {
            let max = next.max_bid();
            if max == 0 {
                return Ok(BidStep::Draw(GameOutcome::draw(next.bids_by_seat())));
            }
            let landlord_seat = next.bids.iter().position(|&b| b == max).unwrap();
            return Ok(BidStep::Play(Box::new(PlayState::new(
                next.deal,
                landlord_seat,
                next.bids_by_seat(),
            ))));
        }
        Ok(BidStep::Bidding(next))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameResult {
    LandlordWin,
    PeasantWin,
    Draw,
}

/// Final result. Score maps are indexed by [`Role::index`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameOutcome {
    pub result: GameResult,
    pub landlord_seat: Option<usize>,
    pub bids_by_seat: [i8; 3],
    pub bid_score: u8,
    pub bomb_count: u8,
    pub spring: bool,
    pub per_role_u: Option<[i8; 3]>,
    pub adp1_scores: Option<[i64; 3]>,
    pub adp2_scores: Option<[i64; 3]>,
}

impl GameOutcome {
    pub fn draw(bids_by_seat: [i8; 3]) -> Self {
        GameOutcome {
            result: GameResult::Draw,
            landlord_seat: None,
            bids_by_seat,
            bid_score: 0,
            bomb_count: 0,
            spring: false,
            per_role_u: None,
            adp1_scores: None,
            adp2_scores: None,
        }
    }

    fn decided(
        result: GameResult,
        landlord_seat: usize,
        bids_by_seat: [i8; 3],
        bid_score: u8,
        bomb_count: u8,
        spring: bool,
    ) -> Self {
        let landlord_u = if result == GameResult::LandlordWin { 1 } else { -1 };
        let mut outcome = GameOutcome {
            result,
            landlord_seat: Some(landlord_seat),
            bids_by_seat,
            bid_score,
            bomb_count,
            spring,
            per_role_u: Some([landlord_u, -landlord_u, -landlord_u]),
            adp1_scores: None,
            adp2_scores: None,
        };
        outcome.adp1_scores = score_adp1(&outcome).ok();
        outcome.adp2_scores = score_adp2(&outcome).ok();
        outcome
    }

    pub fn is_draw(&self) -> bool {
        self.result == GameResult::Draw
    }

    pub fn role_of_seat(&self, seat: usize) -> Option<Role> {
        self.landlord_seat.map(|l| role_of_seat(l, seat))
    }

    pub fn u(&self, role: Role) -> Option<i8> {
        self.per_role_u.map(|u| u[role.index()])
    }
}

fn split_stake(outcome: &GameOutcome, stake: i64) -> Result<[i64; 3]> {
    let u = outcome.per_role_u.ok_or(Error::DrawHasNoScore)?;
    let landlord = i64::from(u[0]) * 2 * stake;
    Ok([landlord, -landlord / 2, -landlord / 2])
}

/// Bid score × 2^bombs × spring doubling; the landlord takes twice the stake.
pub fn score_adp2(outcome: &GameOutcome) -> Result<[i64; 3]> {
    let spring = if outcome.spring { 2 } else { 1 };
    let stake = i64::from(outcome.bid_score) * (1i64 << outcome.bomb_count) * spring;
    split_stake(outcome, stake)
}

/// Base 1 × 2^bombs; bid score and spring are ignored.
pub fn score_adp1(outcome: &GameOutcome) -> Result<[i64; 3]> {
    split_stake(outcome, 1i64 << outcome.bomb_count)
}

pub fn role_of_seat(landlord_seat: usize, seat: usize) -> Role {
    Role::from_index((seat + 3 - landlord_seat) % 3)
}

pub fn seat_of_role(landlord_seat: usize, role: Role) -> usize {
    (landlord_seat + role.index()) % 3
}

/// Cardplay snapshot. Per-role arrays are indexed by [`Role::index`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayState {
    pub deal: Deal,
    pub landlord_seat: usize,
    pub hands: [CardMultiset; 3],
    pub landlord_cards: CardMultiset,
    pub bid_score: u8,
    pub bids_by_seat: [i8; 3],
    pub history: Vec<(Role, Action)>,
    pub played: [CardMultiset; 3],
    pub bomb_count: u8,
    pub to_act: Role,
    peasant_played: bool,
    landlord_plays: u32,
    lead: Option<(Role, Action)>,
    passes: u8,
}

/// Result of one cardplay step.
#[derive(Debug, Clone, PartialEq)]
pub enum PlayStep {
    Playing(PlayState),
    Finished(GameOutcome),
}

impl PlayState {
    /// Reveals the landlord cards into the landlord's hand and starts play.
    pub fn new(deal: Deal, landlord_seat: usize, bids_by_seat: [i8; 3]) -> Self {
        assert!(landlord_seat < 3);
        let mut hands = [CardMultiset::empty(); 3];
        for role in Role::ALL {
            hands[role.index()] = deal.hands[seat_of_role(landlord_seat, role)];
        }
        hands[0] = hands[0] + deal.landlord_cards;
        let bid_score = bids_by_seat.iter().copied().max().unwrap_or(0).max(1) as u8;
        PlayState {
            deal,
            landlord_seat,
            hands,
            landlord_cards: deal.landlord_cards,
            bid_score,
            bids_by_seat,
            history: Vec::new(),
            played: [CardMultiset::empty(); 3],
            bomb_count: 0,
            to_act: Role::Landlord,
            peasant_played: false,
            landlord_plays: 0,
            lead: None,
            passes: 0,
        }
    }

    pub fn seat_of(&self, role: Role) -> usize {
        seat_of_role(self.landlord_seat, role)
    }

    pub fn role_of(&self, seat: usize) -> Role {
        role_of_seat(self.landlord_seat, seat)
    }

    pub fn hand(&self, role: Role) -> &CardMultiset {
        &self.hands[role.index()]
    }

    /// No peasant has played a card yet.
    pub fn spring_possible(&self) -> bool {
        !self.peasant_played
    }

    /// The landlord has made at most the opening play.
    pub fn anti_spring_possible(&self) -> bool {
        self.landlord_plays <= 1
    }

    pub fn trick_context(&self) -> TrickContext {
        TrickContext { lead: self.lead.map(|(_, a)| a) }
    }

    /// The role whose play is currently on the table, if any.
    pub fn lead_role(&self) -> Option<Role> {
        self.lead.map(|(r, _)| r)
    }

    pub fn legal_actions(&self) -> Vec<Action> {
        legal_actions(self.hand(self.to_act), &self.trick_context())
    }

    /// Whether `action` is in the legal set for the role to act, without
    /// materialising the whole set.
    pub fn is_legal(&self, action: &Action) -> bool {
        let ctx = self.trick_context();
        if action.is_pass() {
            return ctx.lead.is_some();
        }
        if !Action::from_cards(&action.cards).contains(action) {
            return false;
        }
        if !action.cards.is_subset_of(self.hand(self.to_act)) {
            return false;
        }
        ctx.lead.is_none_or(|lead| beats(action, &lead))
    }

    /// Cards not yet played by anyone (all hands together).
    pub fn unplayed(&self) -> CardMultiset {
        self.hands[0] + self.hands[1] + self.hands[2]
    }

    /// Hands plus played cards must always reassemble the deck.
    pub fn cards_conserved(&self) -> bool {
        let mut total = CardMultiset::empty();
        for i in 0..3 {
            total = total + self.hands[i] + self.played[i];
        }
        total == CardMultiset::full_deck()
    }

    /// Applies `action` in place. Returns the outcome once a hand empties.
    pub fn play(&mut self, action: Action) -> Result<Option<GameOutcome>> {
        if !self.is_legal(&action) {
            return Err(Error::IllegalMove(format!("{}:{}", self.to_act.short(), action)));
        }
        let role = self.to_act;
        self.history.push((role, action));
        if action.is_pass() {
            self.passes += 1;
            if self.passes == 2 {
                self.lead = None;
                self.passes = 0;
            }
        } else {
            let i = role.index();
            self.hands[i] = self.hands[i] - action.cards;
            self.played[i] = self.played[i] + action.cards;
            if action.is_bomb_like() {
                self.bomb_count += 1;
            }
            if role.is_peasant() {
                self.peasant_played = true;
            } else {
                self.landlord_plays += 1;
            }
            self.lead = Some((role, action));
            self.passes = 0;
            if self.hands[i].is_empty() {
                return Ok(Some(self.outcome_for_winner(role)));
            }
        }
        self.to_act = role.next();
        Ok(None)
    }

    /// Pure variant of [`play`](Self::play).
    pub fn step_play(&self, action: Action) -> Result<PlayStep> {
        let mut next = self.clone();
        Ok(match next.play(action)? {
            Some(outcome) => PlayStep::Finished(outcome),
            None => PlayStep::Playing(next),
        })
    }

    fn outcome_for_winner(&self, winner: Role) -> GameOutcome {
        let (result, spring) = if winner == Role::Landlord {
            (GameResult::LandlordWin, !self.peasant_played)
        } else {
            (GameResult::PeasantWin, self.landlord_plays == 1)
        };
        GameOutcome::decided(
            result,
            self.landlord_seat,
            self.bids_by_seat,
            self.bid_score,
            self.bomb_count,
            spring,
        )
    }
}

/// Either phase of a game, or its end.
#[derive(Debug, Clone, PartialEq)]
pub enum GameState {
    Bidding(BidState),
    Playing(Box<PlayState>),
    Finished(GameOutcome),
}

impl GameState {
    pub fn new(deal: Deal) -> Self {
        GameState::Bidding(BidState::new(deal))
    }

    /// Seat whose turn it is, if the game is still running.
    pub fn seat_to_act(&self) -> Option<usize> {
        match self {
            GameState::Bidding(b) => Some(b.to_act()),
            GameState::Playing(p) => Some(p.seat_of(p.to_act)),
            GameState::Finished(_) => None,
        }
    }

    pub fn is_finished(&self) -> bool {
        matches!(self, GameState::Finished(_))
    }

    pub fn apply_bid(&self, bid: u8) -> Result<GameState> {
        match self {
            GameState::Bidding(b) => Ok(match b.step_bid(bid)? {
                BidStep::Bidding(b) => GameState::Bidding(b),
                BidStep::Play(p) => GameState::Playing(p),
                BidStep::Draw(o) => GameState::Finished(o),
            }),
            _ => Err(Error::AuctionFinished),
        }
    }

    pub fn apply_play(&self, action: Action) -> Result<GameState> {
        match self {
            GameState::Playing(p) => Ok(match p.step_play(action)? {
                PlayStep::Playing(p) => GameState::Playing(Box::new(p)),
                PlayStep::Finished(o) => GameState::Finished(o),
            }),
            _ => Err(Error::IllegalMove(format!("{action} outside cardplay"))),
        }
    }
}
