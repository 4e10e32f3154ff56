//! The Doudizhu action taxonomy.
//!
//! Every move is an [`Action`]: a category, the lowest rank of its main group
//! (`principal`), the number of consecutive main groups (`length`), and the
//! attached kickers. [`enumerate_all_actions`] lists the complete action space
//! by generate-and-test; [`legal_actions`] builds the playable subset for one
//! hand directly and is the hot path during self-play.
//!
//! Kicker conventions:
//!
//! * kickers never share a rank with the main group;
//! * solo kickers may repeat a rank (a pair used as two solos) but the two
//!   jokers never appear together, since that would embed a rocket;
//! * quad kickers hold at most two copies of a rank, plane kickers at most
//!   three, and a three-copy plane kicker may not sit directly next to the
//!   plane (it would extend the plane instead);
//! * pair kickers use distinct non-joker ranks.
//!
//! With these rules the per-category sizes are 1, 15, 13, 13, 182, 156, 13, 1,
//! 1326, 858, 36, 52, 45, 21822 and 2939 (27,472 in total).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::cards::{CardMultiset, Rank, NUM_RANKS};
use crate::error::{Error, Result};

const ACE: u8 = Rank::ACE.ordinal();
const TWO: u8 = Rank::TWO.ordinal();
const BLACK: usize = Rank::BLACK_JOKER.index();
const RED: usize = Rank::RED_JOKER.index();

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    Pass,
    Solo,
    Pair,
    Trio,
    TrioSolo,
    TrioPair,
    Bomb,
    Rocket,
    QuadSolo,
    QuadPair,
    ChainSolo,
    ChainPair,
    Plane,
    PlaneSolo,
    PlanePair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum KickerKind {
    None,
    Solo,
    Pair,
}

impl Category {
    pub const ALL: [Category; 15] = [
        Category::Pass,
        Category::Solo,
        Category::Pair,
        Category::Trio,
        Category::TrioSolo,
        Category::TrioPair,
        Category::Bomb,
        Category::Rocket,
        Category::QuadSolo,
        Category::QuadPair,
        Category::ChainSolo,
        Category::ChainPair,
        Category::Plane,
        Category::PlaneSolo,
        Category::PlanePair,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Pass => "Pass",
            Category::Solo => "Solo",
            Category::Pair => "Pair",
            Category::Trio => "Trio",
            Category::TrioSolo => "Trio-Solo",
            Category::TrioPair => "Trio-Pair",
            Category::Bomb => "Bomb",
            Category::Rocket => "Rocket",
            Category::QuadSolo => "Quad-Solo",
            Category::QuadPair => "Quad-Pair",
            Category::ChainSolo => "Chain-Solo",
            Category::ChainPair => "Chain-Pair",
            Category::Plane => "Plane",
            Category::PlaneSolo => "Plane-Solo",
            Category::PlanePair => "Plane-Pair",
        }
    }

    /// Copies of each main-group rank.
    fn unit(self) -> u8 {
        match self {
            Category::Pass | Category::Rocket => 0,
            Category::Solo | Category::ChainSolo => 1,
            Category::Pair | Category::ChainPair => 2,
            Category::Trio
            | Category::TrioSolo
            | Category::TrioPair
            | Category::Plane
            | Category::PlaneSolo
            | Category::PlanePair => 3,
            Category::Bomb | Category::QuadSolo | Category::QuadPair => 4,
        }
    }

    fn kicker_kind(self) -> KickerKind {
        match self {
            Category::TrioSolo | Category::QuadSolo | Category::PlaneSolo => KickerKind::Solo,
            Category::TrioPair | Category::QuadPair | Category::PlanePair => KickerKind::Pair,
            _ => KickerKind::None,
        }
    }

    /// Number of kicker units (solos or pairs) for a main group of `length`.
    fn kicker_units(self, length: u8) -> u8 {
        match self {
            Category::TrioSolo | Category::TrioPair => 1,
            Category::QuadSolo | Category::QuadPair => 2,
            Category::PlaneSolo | Category::PlanePair => length,
            _ => 0,
        }
    }

    /// Allowed numbers of consecutive main groups.
    pub fn lengths(self) -> std::ops::RangeInclusive<u8> {
        match self {
            Category::ChainSolo => 5..=12,
            Category::ChainPair => 3..=10,
            Category::Plane => 2..=6,
            Category::PlaneSolo => 2..=5,
            Category::PlanePair => 2..=4,
            _ => 1..=1,
        }
    }

    pub fn is_chain(self) -> bool {
        matches!(
            self,
            Category::ChainSolo
                | Category::ChainPair
                | Category::Plane
                | Category::PlaneSolo
                | Category::PlanePair
        )
    }

    /// Highest principal rank the main group may start at.
    fn max_principal(self, length: u8) -> u8 {
        match self {
            Category::Solo => Rank::RED_JOKER.ordinal(),
            c if c.is_chain() => ACE + 1 - length,
            _ => TWO,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A single move. The derived ordering (category, principal, length, kickers)
/// is the canonical order used for legal-move lists and tie breaking.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Action {
    pub category: Category,
    pub principal: Rank,
    pub length: u8,
    pub kickers: CardMultiset,
    pub cards: CardMultiset,
}

impl Action {
    pub const PASS: Action = Action {
        category: Category::Pass,
        principal: Rank::THREE,
        length: 0,
        kickers: CardMultiset::empty(),
        cards: CardMultiset::empty(),
    };

    pub fn rocket() -> Action {
        let mut cards = CardMultiset::empty();
        cards.add_rank(Rank::BLACK_JOKER, 1);
        cards.add_rank(Rank::RED_JOKER, 1);
        Action {
            category: Category::Rocket,
            principal: Rank::BLACK_JOKER,
            length: 1,
            kickers: CardMultiset::empty(),
            cards,
        }
    }

    fn with_main(category: Category, principal: u8, length: u8, kickers: CardMultiset) -> Action {
        let mut main = CardMultiset::empty();
        for r in principal..principal + length {
            main.add_rank(Rank::new(r).expect("rank in range"), category.unit());
        }
        Action {
            category,
            principal: Rank::new(principal).expect("rank in range"),
            length,
            kickers,
            cards: main + kickers,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.category == Category::Pass
    }

    /// Bombs and the rocket double the stake.
    pub fn is_bomb_like(&self) -> bool {
        matches!(self.category, Category::Bomb | Category::Rocket)
    }

    pub fn num_cards(&self) -> usize {
        self.cards.total()
    }

    /// Every action whose cards are exactly `cards`, in canonical order.
    pub fn from_cards(cards: &CardMultiset) -> Vec<Action> {
        if cards.is_empty() {
            return vec![Action::PASS];
        }
        cards_index().get(cards).cloned().unwrap_or_default()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            f.write_str("Pass")
        } else {
            write!(f, "{}", self.cards)
        }
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.category.name(), self)
    }
}

impl FromStr for Action {
    type Err = Error;

    /// Parses `"Pass"`/`"P"` or a card string. Card strings that match more
    /// than one category resolve to the first in canonical order.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("pass") || t.eq_ignore_ascii_case("p") {
            return Ok(Action::PASS);
        }
        let cards: CardMultiset = t.parse()?;
        Action::from_cards(&cards)
            .into_iter()
            .find(|a| !a.is_pass())
            .ok_or_else(|| Error::ActionParse(format!("\"{t}\" is not a valid combination")))
    }
}

/// The action currently to beat, absent when leading a fresh trick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrickContext {
    pub lead: Option<Action>,
}

impl TrickContext {
    pub fn leading() -> Self {
        TrickContext { lead: None }
    }

    pub fn following(lead: Action) -> Self {
        debug_assert!(!lead.is_pass());
        TrickContext { lead: Some(lead) }
    }
}

/// Whether `a` may be played over `b`. Neither may be a pass.
pub fn beats(a: &Action, b: &Action) -> bool {
    debug_assert!(!a.is_pass() && !b.is_pass());
    match (a.category, b.category) {
        (_, Category::Rocket) => false,
        (Category::Rocket, _) => true,
        (Category::Bomb, Category::Bomb) => a.principal > b.principal,
        (Category::Bomb, _) => true,
        (_, Category::Bomb) => false,
        (ca, cb) => ca == cb && a.length == b.length && a.principal > b.principal,
    }
}

// ---------------------------------------------------------------------------
// Full enumeration (generate-and-test).

fn multisets_with_replacement(pool: &[u8], k: usize) -> Vec<Vec<u8>> {
    fn rec(pool: &[u8], k: usize, start: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..pool.len() {
            cur.push(pool[i]);
            rec(pool, k, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(pool, k, 0, &mut Vec::with_capacity(k), &mut out);
    out
}

fn kicker_choice_valid(category: Category, principal: u8, length: u8, choice: &[u8]) -> bool {
    let mut mult = [0u8; NUM_RANKS];
    for &r in choice {
        mult[r as usize] += 1;
    }
    if mult[BLACK] > 0 && mult[RED] > 0 {
        return false;
    }
    for (r, &m) in mult.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let rank = Rank::new(r as u8).unwrap();
        let cap = match category.kicker_kind() {
            KickerKind::Pair => 1,
            KickerKind::Solo if rank.is_joker() => 1,
            KickerKind::Solo => match category {
                Category::TrioSolo => 1,
                Category::QuadSolo => 2,
                _ => 3,
            },
            KickerKind::None => 0,
        };
        if m > cap {
            return false;
        }
        if category == Category::PlaneSolo && m == 3 {
            let r = r as u8;
            let adjacent = (principal > 0 && r == principal - 1) || r == principal + length;
            if adjacent && r <= ACE {
                return false;
            }
        }
    }
    true
}

/// Every syntactically legal action, including `Pass`, in canonical order.
pub fn enumerate_all_actions() -> Vec<Action> {
    let mut out = vec![Action::PASS];
    for &category in &Category::ALL[1..] {
        if category == Category::Rocket {
            out.push(Action::rocket());
            continue;
        }
        for length in category.lengths() {
            for principal in 0..=category.max_principal(length) {
                let window = principal..principal + length;
                let kind = category.kicker_kind();
                if kind == KickerKind::None {
                    out.push(Action::with_main(category, principal, length, CardMultiset::empty()));
                    continue;
                }
                let pool: Vec<u8> = (0..NUM_RANKS as u8)
                    .filter(|r| !window.contains(r))
                    .filter(|&r| kind == KickerKind::Solo || r <= TWO)
                    .collect();
                let units = category.kicker_units(length) as usize;
                for choice in multisets_with_replacement(&pool, units) {
                    if !kicker_choice_valid(category, principal, length, &choice) {
                        continue;
                    }
                    let mut kickers = CardMultiset::empty();
                    let per = if kind == KickerKind::Pair { 2 } else { 1 };
                    for &r in &choice {
                        kickers.add_rank(Rank::new(r).unwrap(), per);
                    }
                    out.push(Action::with_main(category, principal, length, kickers));
                }
            }
        }
    }
    out.sort();
    out
}

/// Shared read-only copy of [`enumerate_all_actions`].
pub fn all_actions() -> &'static [Action] {
    static ALL: OnceLock<Vec<Action>> = OnceLock::new();
    ALL.get_or_init(enumerate_all_actions)
}

fn cards_index() -> &'static HashMap<CardMultiset, Vec<Action>> {
    static INDEX: OnceLock<HashMap<CardMultiset, Vec<Action>>> = OnceLock::new();
    INDEX.get_or_init(|| {
        let mut map: HashMap<CardMultiset, Vec<Action>> = HashMap::new();
        for a in all_actions() {
            map.entry(a.cards).or_default().push(*a);
        }
        map
    })
}

/// Per-category sizes of the action space, in [`Category::ALL`] order.
pub fn category_counts() -> Vec<(Category, usize)> {
    let all = all_actions();
    Category::ALL
        .iter()
        .map(|&c| (c, all.iter().filter(|a| a.category == c).count()))
        .collect()
}

// ---------------------------------------------------------------------------
// Hand-driven generation.

struct Generator<'a> {
    hand: &'a [u8; NUM_RANKS],
    out: Vec<Action>,
}

impl Generator<'_> {
    fn has(&self, rank: u8, n: u8) -> bool {
        self.hand[rank as usize] >= n
    }

    fn window_held(&self, principal: u8, length: u8, unit: u8) -> bool {
        (principal..principal + length).all(|r| self.has(r, unit))
    }

    /// Principals strictly above `above` (or all, when `None`).
    fn principals(category: Category, length: u8, above: Option<Rank>) -> std::ops::RangeInclusive<u8> {
        let lo = above.map_or(0, |r| r.ordinal() + 1);
        lo..=category.max_principal(length)
    }

    fn category(&mut self, category: Category, length: u8, above: Option<Rank>) {
        match category {
            Category::Pass => {}
            Category::Rocket => {
                if above.is_none() && self.has(BLACK as u8, 1) && self.has(RED as u8, 1) {
                    self.out.push(Action::rocket());
                }
            }
            _ => {
                let unit = category.unit();
                for principal in Self::principals(category, length, above) {
                    if !self.window_held(principal, length, unit) {
                        continue;
                    }
                    match category.kicker_kind() {
                        KickerKind::None => self.out.push(Action::with_main(
                            category,
                            principal,
                            length,
                            CardMultiset::empty(),
                        )),
                        KickerKind::Solo => self.solo_kickers(category, principal, length),
                        KickerKind::Pair => self.pair_kickers(category, principal, length),
                    }
                }
            }
        }
    }

    fn solo_kickers(&mut self, category: Category, principal: u8, length: u8) {
        let units = category.kicker_units(length);
        let per_rank_cap = match category {
            Category::TrioSolo => 1,
            Category::QuadSolo => 2,
            _ => 3,
        };
        let mut caps = [0u8; NUM_RANKS];
        for r in 0..NUM_RANKS as u8 {
            if (principal..principal + length).contains(&r) {
                continue;
            }
            let joker = r as usize >= BLACK;
            caps[r as usize] = self.hand[r as usize].min(if joker { 1 } else { per_rank_cap });
        }
        let mut chosen = [0u8; NUM_RANKS];
        self.solo_dfs(category, principal, length, &caps, 0, units, &mut chosen);
    }

    #[allow(clippy::too_many_arguments)]
    fn solo_dfs(
        &mut self,
        category: Category,
        principal: u8,
        length: u8,
        caps: &[u8; NUM_RANKS],
        rank: usize,
        remaining: u8,
        chosen: &mut [u8; NUM_RANKS],
    ) {
        if remaining == 0 {
            if chosen[BLACK] > 0 && chosen[RED] > 0 {
                return;
            }
            let kickers = CardMultiset::from_counts(*chosen).expect("kickers within deck");
            self.out.push(Action::with_main(category, principal, length, kickers));
            return;
        }
        if rank == NUM_RANKS {
            return;
        }
        let r = rank as u8;
        let adjacent_to_plane = category == Category::PlaneSolo
            && r <= ACE
            && ((principal > 0 && r == principal - 1) || r == principal + length);
        for n in (0..=caps[rank].min(remaining)).rev() {
            if n == 3 && adjacent_to_plane {
                continue;
            }
            chosen[rank] = n;
            self.solo_dfs(category, principal, length, caps, rank + 1, remaining - n, chosen);
        }
        chosen[rank] = 0;
    }

    fn pair_kickers(&mut self, category: Category, principal: u8, length: u8) {
        let pool: Vec<u8> = (0..=TWO)
            .filter(|r| !(principal..principal + length).contains(r) && self.has(*r, 2))
            .collect();
        let units = category.kicker_units(length) as usize;
        let mut idx: Vec<usize> = Vec::with_capacity(units);
        self.pair_dfs(category, principal, length, &pool, 0, units, &mut idx);
    }

    #[allow(clippy::too_many_arguments)]
    fn pair_dfs(
        &mut self,
        category: Category,
        principal: u8,
        length: u8,
        pool: &[u8],
        start: usize,
        units: usize,
        idx: &mut Vec<usize>,
    ) {
        if idx.len() == units {
            let mut kickers = CardMultiset::empty();
            for &i in idx.iter() {
                kickers.add_rank(Rank::new(pool[i]).unwrap(), 2);
            }
            self.out.push(Action::with_main(category, principal, length, kickers));
            return;
        }
        for i in start..pool.len() {
            idx.push(i);
            self.pair_dfs(category, principal, length, pool, i + 1, units, idx);
            idx.pop();
        }
    }
}

/// Legal moves for `hand` in canonical order. A leader must play; a follower
/// may pass or play anything that [`beats`] the lead.
pub fn legal_actions(hand: &CardMultiset, ctx: &TrickContext) -> Vec<Action> {
    let mut gen = Generator { hand: hand.counts(), out: Vec::new() };
    match ctx.lead {
        None => {
            for &category in &Category::ALL[1..] {
                for length in category.lengths() {
                    gen.category(category, length, None);
                }
            }
        }
        Some(lead) => {
            gen.out.push(Action::PASS);
            match lead.category {
                Category::Rocket => {}
                Category::Bomb => {
                    gen.category(Category::Bomb, 1, Some(lead.principal));
                    gen.category(Category::Rocket, 1, None);
                }
                category => {
                    gen.category(category, lead.length, Some(lead.principal));
                    gen.category(Category::Bomb, 1, None);
                    gen.category(Category::Rocket, 1, None);
                }
            }
        }
    }
    gen.out.sort_unstable();
    gen.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn act(s: &str) -> Action {
        s.parse().unwrap()
    }

    fn brute_force_legal(hand: &CardMultiset, ctx: &TrickContext) -> Vec<Action> {
        let mut out: Vec<Action> = all_actions()
            .iter()
            .filter(|a| a.cards.is_subset_of(hand))
            .filter(|a| match ctx.lead {
                None => !a.is_pass(),
                Some(lead) => a.is_pass() || beats(a, &lead),
            })
            .copied()
            .collect();
        out.sort();
        out
    }

    fn random_hand(rng: &mut ChaCha8Rng, size: usize) -> CardMultiset {
        let mut deck: Vec<Rank> = Rank::all()
            .flat_map(|r| std::iter::repeat_n(r, r.copies() as usize))
            .collect();
        let mut hand = CardMultiset::empty();
        for _ in 0..size {
            let i = rng.random_range(0..deck.len());
            hand.add_rank(deck.swap_remove(i), 1);
        }
        hand
    }

    #[test]
    fn category_sizes() {
        let counts: HashMap<Category, usize> = category_counts().into_iter().collect();
        assert_eq!(counts[&Category::Pass], 1);
        assert_eq!(counts[&Category::Solo], 15);
        assert_eq!(counts[&Category::Pair], 13);
        assert_eq!(counts[&Category::Trio], 13);
        assert_eq!(counts[&Category::TrioSolo], 182);
        assert_eq!(counts[&Category::TrioPair], 156);
        assert_eq!(counts[&Category::Bomb], 13);
        assert_eq!(counts[&Category::Rocket], 1);
        assert_eq!(counts[&Category::QuadSolo], 1326);
        assert_eq!(counts[&Category::QuadPair], 858);
        assert_eq!(counts[&Category::ChainSolo], 36);
        assert_eq!(counts[&Category::ChainPair], 52);
        assert_eq!(counts[&Category::Plane], 45);
        assert_eq!(counts[&Category::PlaneSolo], 21822);
        assert_eq!(counts[&Category::PlanePair], 2939);
        assert_eq!(all_actions().len(), 27_472);
    }

    #[test]
    fn chain_solo_windows() {
        // Windows of length 5..=12 over the twelve chainable ranks.
        let windows: usize = (5..=12).map(|len| 12 - len + 1).sum();
        assert_eq!(windows, 36);
    }

    #[test]
    fn enumeration_has_no_duplicates_and_cards_are_consistent() {
        let all = all_actions();
        let mut seen = std::collections::HashSet::new();
        for a in all {
            assert!(seen.insert(*a), "duplicate {a:?}");
            assert!(a.cards.is_subset_of(&CardMultiset::full_deck()));
            assert!(a.num_cards() <= 20);
            if a.category.is_chain() {
                assert!(a.principal.ordinal() + a.length - 1 <= ACE);
            }
        }
    }

    #[test]
    fn beats_examples() {
        assert!(beats(&Action::rocket(), &act("2222")));
        assert!(beats(&act("44"), &act("33")));
        assert!(!beats(&act("33"), &act("44")));
        assert!(beats(&act("45678"), &act("34567")));
        assert!(!beats(&act("456789"), &act("34567")));
        assert!(beats(&act("3333"), &act("22")));
        assert!(!beats(&act("22"), &act("3333")));
        assert!(!beats(&act("3334"), &act("444")));
    }

    #[test]
    fn beats_is_a_strict_order_within_categories() {
        let all: Vec<Action> = all_actions().iter().filter(|a| !a.is_pass()).copied().collect();
        for a in all.iter().step_by(97) {
            assert!(!beats(a, a));
            for b in all.iter().step_by(89) {
                assert!(!(beats(a, b) && beats(b, a)), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn legal_examples() {
        let hand: CardMultiset = "33".parse().unwrap();
        assert_eq!(
            legal_actions(&hand, &TrickContext::following(act("R"))),
            vec![Action::PASS]
        );
        let jokers: CardMultiset = "BR".parse().unwrap();
        assert_eq!(
            legal_actions(&jokers, &TrickContext::following(act("7777"))),
            vec![Action::PASS, Action::rocket()]
        );
        let lead = legal_actions(&hand, &TrickContext::leading());
        assert_eq!(lead, vec![act("3"), act("33")]);
    }

    #[test]
    fn legal_matches_brute_force_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let leads: Vec<Action> = all_actions().iter().filter(|a| !a.is_pass()).copied().collect();
        for i in 0..400 {
            let size = rng.random_range(1..=20);
            let hand = random_hand(&mut rng, size);
            let ctx = if i % 3 == 0 {
                TrickContext::leading()
            } else {
                TrickContext::following(leads[rng.random_range(0..leads.len())])
            };
            assert_eq!(legal_actions(&hand, &ctx), brute_force_legal(&hand, &ctx), "hand {hand}");
        }
    }

    #[test]
    fn parse_resolves_categories() {
        assert_eq!(act("888999TJ").category, Category::PlaneSolo);
        assert_eq!(act("5557").category, Category::TrioSolo);
        assert_eq!(act("BR").category, Category::Rocket);
        assert_eq!(act("333444555777").category, Category::PlaneSolo);
        assert_eq!(act("333444555666").category, Category::Plane);
        assert!("34".parse::<Action>().is_err());
        assert!(act("pass").is_pass());
    }
}
