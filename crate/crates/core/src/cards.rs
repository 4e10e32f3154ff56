//! Ranks, card multisets and dealing.
//!
//! Suits never matter in Doudizhu, so a pile of cards is just a count per rank.

use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_RANKS: usize = 15;
/// Ranks `3..=2` come in four copies, the two jokers in one.
pub const NUM_SUITED_RANKS: usize = 13;
pub const DECK_SIZE: usize = 54;
pub const ENCODING_WIDTH: usize = 54;

const RANK_CHARS: &[u8; NUM_RANKS] = b"3456789TJQKA2BR";

/// Card rank in playing order `3 < 4 < … < A < 2 < B < R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rank(u8);

impl Rank {
    pub const THREE: Rank = Rank(0);
    pub const ACE: Rank = Rank(11);
    pub const TWO: Rank = Rank(12);
    pub const BLACK_JOKER: Rank = Rank(13);
    pub const RED_JOKER: Rank = Rank(14);

    pub fn new(ordinal: u8) -> Option<Rank> {
        (ordinal < NUM_RANKS as u8).then_some(Rank(ordinal))
    }

    pub const fn ordinal(self) -> u8 {
        self.0
    }

    pub const fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_joker(self) -> bool {
        self.0 >= NUM_SUITED_RANKS as u8
    }

    /// Copies of this rank in a full deck.
    pub fn copies(self) -> u8 {
        if self.is_joker() {
            1
        } else {
            4
        }
    }

    pub fn to_char(self) -> char {
        RANK_CHARS[self.index()] as char
    }

    pub fn from_char(c: char) -> Option<Rank> {
        let c = c.to_ascii_uppercase() as u8;
        RANK_CHARS.iter().position(|&r| r == c).map(|i| Rank(i as u8))
    }

    pub fn all() -> impl Iterator<Item = Rank> {
        (0..NUM_RANKS as u8).map(Rank)
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

/// Copies held of each of the fifteen ranks.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct CardMultiset([u8; NUM_RANKS]);

impl CardMultiset {
    pub const fn empty() -> Self {
        CardMultiset([0; NUM_RANKS])
    }

    pub const fn full_deck() -> Self {
        CardMultiset([4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 1, 1])
    }

    /// Builds a multiset from raw counts, rejecting counts a deck cannot hold.
    pub fn from_counts(counts: [u8; NUM_RANKS]) -> Result<Self> {
        for r in Rank::all() {
            if counts[r.index()] > r.copies() {
                return Err(Error::CardParse(format!(
                    "{} copies of {} exceed the deck",
                    counts[r.index()],
                    r
                )));
            }
        }
        Ok(CardMultiset(counts))
    }

    pub fn counts(&self) -> &[u8; NUM_RANKS] {
        &self.0
    }

    pub fn count(&self, rank: Rank) -> u8 {
        self.0[rank.index()]
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&c| c as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add_rank(&mut self, rank: Rank, n: u8) {
        self.0[rank.index()] += n;
    }

    pub fn is_subset_of(&self, other: &CardMultiset) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn checked_sub(&self, other: &CardMultiset) -> Option<CardMultiset> {
        let mut out = *self;
        for i in 0..NUM_RANKS {
            out.0[i] = self.0[i].checked_sub(other.0[i])?;
        }
        Some(out)
    }

    /// Per-rank `max(0, self - other)`.
    pub fn saturating_sub(&self, other: &CardMultiset) -> CardMultiset {
        let mut out = *self;
        for i in 0..NUM_RANKS {
            out.0[i] = self.0[i].saturating_sub(other.0[i]);
        }
        out
    }

    pub fn iter_ranks(&self) -> impl Iterator<Item = (Rank, u8)> + '_ {
        Rank::all()
            .map(move |r| (r, self.0[r.index()]))
            .filter(|&(_, c)| c > 0)
    }

    /// The 54-wide threshold encoding: column `c` of row `i` (row-major over
    /// four rows of thirteen) is set when more than `i` copies of rank `c` are
    /// held; the last two slots flag the black and red joker.
    pub fn encode54(&self) -> [f32; ENCODING_WIDTH] {
        let mut out = [0.0; ENCODING_WIDTH];
        self.write_encode54(&mut out);
        out
    }

    pub fn write_encode54(&self, out: &mut [f32]) {
        debug_assert_eq!(out.len(), ENCODING_WIDTH);
        for v in out.iter_mut() {
            *v = 0.0;
        }
        for c in 0..NUM_SUITED_RANKS {
            for i in 0..self.0[c] as usize {
                out[i * NUM_SUITED_RANKS + c] = 1.0;
            }
        }
        out[52] = f32::from(self.0[13]);
        out[53] = f32::from(self.0[14]);
    }

    /// Inverse of [`encode54`](Self::encode54): counts the set threshold bits per column.
    pub fn decode54(bits: &[f32]) -> Result<CardMultiset> {
        if bits.len() != ENCODING_WIDTH {
            return Err(Error::CardParse(format!("expected 54 bits, got {}", bits.len())));
        }
        let mut counts = [0u8; NUM_RANKS];
        for c in 0..NUM_SUITED_RANKS {
            counts[c] = (0..4).filter(|i| bits[i * NUM_SUITED_RANKS + c] > 0.5).count() as u8;
        }
        counts[13] = u8::from(bits[52] > 0.5);
        counts[14] = u8::from(bits[53] > 0.5);
        CardMultiset::from_counts(counts)
    }
}

impl Add for CardMultiset {
    type Output = CardMultiset;

    fn add(mut self, rhs: CardMultiset) -> CardMultiset {
        for i in 0..NUM_RANKS {
            self.0[i] += rhs.0[i];
        }
        self
    }
}

impl Sub for CardMultiset {
    type Output = CardMultiset;

    /// Panics when `rhs` is not a subset of `self`.
    fn sub(self, rhs: CardMultiset) -> CardMultiset {
        self.checked_sub(&rhs).expect("card subtraction underflow")
    }
}

impl fmt::Display for CardMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (rank, n) in self.iter_ranks() {
            for _ in 0..n {
                write!(f, "{}", rank)?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for CardMultiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cards(\"{}\")", self)
    }
}

impl FromStr for CardMultiset {
    type Err = Error;

    /// Parses `"333444569TTJJQKK2"`-style notation; order does not matter.
    fn from_str(s: &str) -> Result<Self> {
        let mut counts = [0u8; NUM_RANKS];
        for ch in s.chars().filter(|c| !c.is_whitespace()) {
            let rank = Rank::from_char(ch)
                .ok_or_else(|| Error::CardParse(format!("unknown card '{ch}' in \"{s}\"")))?;
            counts[rank.index()] += 1;
        }
        CardMultiset::from_counts(counts)
    }
}

/// Three 17-card hands in bidding order plus the three face-down landlord cards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deal {
    pub hands: [CardMultiset; 3],
    pub landlord_cards: CardMultiset,
    pub seed: u64,
}

impl Deal {
    /// Shuffles a fresh deck with a seeded ChaCha stream and deals 17/17/17/3.
    pub fn from_seed(seed: u64) -> Deal {
        let mut deck: Vec<Rank> = Rank::all()
            .flat_map(|r| std::iter::repeat_n(r, r.copies() as usize))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        deck.shuffle(&mut rng);

        let mut hands = [CardMultiset::empty(); 3];
        for (i, rank) in deck[..51].iter().enumerate() {
            hands[i % 3].add_rank(*rank, 1);
        }
        let mut landlord_cards = CardMultiset::empty();
        for rank in &deck[51..] {
            landlord_cards.add_rank(*rank, 1);
        }
        Deal { hands, landlord_cards, seed }
    }
}

pub fn deal(seed: u64) -> Deal {
    Deal::from_seed(seed)
}
