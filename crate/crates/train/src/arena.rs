//! Duplicate-deck matches, bidding experiments and the metrics they report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ddz_core::game::BidStep;
use ddz_core::{BidState, Deal, GameOutcome, GameRecord, RecordedGame, Role};
use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, AgentSpec, BuiltAgent, ScriptedBidder};
use crate::error::{Result, TrainError};

const Z95: f64 = 1.96;

/// Plays one game. With `bids` the auction is replayed from that list
/// instead of asking the agents.
pub fn play_game(
    seats: [&dyn Agent; 3],
    deal_seed: u64,
    bids: Option<&[u8]>,
    rng: &mut ChaCha8Rng,
) -> Result<RecordedGame> {
    let mut record = GameRecord::new(deal_seed);
    let mut bidding = BidState::new(Deal::from_seed(deal_seed));
    let mut state = loop {
        let bid = match bids {
            Some(list) => *list
                .get(record.bids.len())
                .ok_or_else(|| TrainError::Config("fixed auction ended before a landlord was chosen".into()))?,
            None => seats[bidding.to_act()].bid(&bidding, rng)?,
        };
        record.bids.push(bid);
        match bidding.step_bid(bid)? {
            BidStep::Bidding(next) => bidding = next,
            BidStep::Play(play) => break *play,
            BidStep::Draw(outcome) => return Ok(RecordedGame { record, outcome }),
        }
    };
    loop {
        let role = state.to_act;
        let legal = state.legal_actions();
        let i = seats[state.seat_of(role)].play(&state, &legal, rng)?;
        let action = *legal.get(i).ok_or_else(|| TrainError::Config(format!("agent chose index {i}")))?;
        record.plays.push((role, action));
        if let Some(outcome) = state.play(action)? {
            return Ok(RecordedGame { record, outcome });
        }
    }
}

/// A uniformly random auction that ends with a landlord.
pub fn random_auction(deal: &Deal, rng: &mut ChaCha8Rng) -> Vec<u8> {
    loop {
        let mut bids = Vec::new();
        let mut state = BidState::new(deal.clone());
        loop {
            let bid = *state.valid_bids().choose(rng).expect("pass is always valid");
            bids.push(bid);
            match state.step_bid(bid).expect("valid bid") {
                BidStep::Bidding(next) => state = next,
                BidStep::Play(_) => return bids,
                BidStep::Draw(_) => break,
            }
        }
    }
}

/// The fixed-threshold bidding baseline.
pub fn baseline_scripted_bidder(state: &BidState) -> u8 {
    ScriptedBidder::default().decide(state)
}

/// Signed score of `seat` under ADP1 or ADP2; `None` for a draw.
pub fn seat_score(outcome: &GameOutcome, seat: usize, adp2: bool) -> Option<i64> {
    let role = outcome.role_of_seat(seat)?;
    let scores = if adp2 { outcome.adp2_scores? } else { outcome.adp1_scores? };
    Some(scores[role.index()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subject {
    Seat(usize),
    Role(Role),
}

/// Mean and 95% normal-approximation half-width.
fn mean_ci(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (Some(mean), Some(Z95 * (var / n as f64).sqrt()))
}

fn proportion_ci(p: f64, n: usize) -> f64 {
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

/// WP and ADP are over decided games and absent when every game was a
/// draw; LP and DR are over all games.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub games: usize,
    pub decided: usize,
    pub wp: Option<f64>,
    pub wp_ci: Option<f64>,
    pub adp1: Option<f64>,
    pub adp1_ci: Option<f64>,
    pub adp2: Option<f64>,
    pub adp2_ci: Option<f64>,
    pub lp: f64,
    pub dr: f64,
}

/// Per-game signed results: `(won, adp1, adp2, was_landlord)`.
type Row = (bool, f64, f64, bool);

fn aggregate(games: usize, rows: &[Row]) -> Metrics {
    let decided = rows.len();
    let wins = rows.iter().filter(|r| r.0).count();
    let wp = (decided > 0).then(|| wins as f64 / decided as f64);
    let (adp1, adp1_ci) = mean_ci(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
    let (adp2, adp2_ci) = mean_ci(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    Metrics {
        games,
        decided,
        wp,
        wp_ci: wp.map(|p| proportion_ci(p, decided)),
        adp1,
        adp1_ci,
        adp2,
        adp2_ci,
        lp: rows.iter().filter(|r| r.3).count() as f64 / games as f64,
        dr: (games - decided) as f64 / games as f64,
    }
}

/// WP, ADP1, ADP2, LP and DR for one seat or role. Scores are the
/// subject's own: ±2·stake as landlord, ±stake as a peasant.
pub fn compute_metrics(records: &[RecordedGame], subject: Subject) -> Result<Metrics> {
    if records.is_empty() {
        return Err(TrainError::EmptyRecords);
    }
    let rows: Vec<Row> = records
        .iter()
        .filter_map(|g| {
            let o = &g.outcome;
            let role = match subject {
                Subject::Seat(s) => o.role_of_seat(s)?,
                Subject::Role(r) => {
                    o.landlord_seat?;
                    r
                }
            };
            let a1 = o.adp1_scores?[role.index()];
            let a2 = o.adp2_scores?[role.index()];
            Some((o.u(role)? > 0, a1 as f64, a2 as f64, role == Role::Landlord))
        })
        .collect();
    Ok(aggregate(records.len(), &rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiddingProtocol {
    /// A random valid auction per deck, re-rolled until someone bids.
    #[default]
    Random,
    /// Agent A bids for all three seats; all-pass decks are redealt.
    AgentA,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateConfig {
    pub decks: usize,
    pub seed: u64,
    pub protocol: BiddingProtocol,
    /// Worker threads; 0 means one per available core.
    pub threads: usize,
}

impl Default for DuplicateConfig {
    fn default() -> Self {
        DuplicateConfig { decks: 4000, seed: 0, protocol: BiddingProtocol::Random, threads: 0 }
    }
}

/// One of the two games played on a deck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DuplicateGame {
    pub deck: usize,
    pub a_is_landlord: bool,
    pub game: RecordedGame,
}

impl DuplicateGame {
    /// A's team result: the landlord's score, or both peasants' combined.
    pub fn a_result(&self) -> Option<Row> {
        let o = &self.game.outcome;
        let role = if self.a_is_landlord { Role::Landlord } else { Role::PeasantDown };
        let team = |s: [i64; 3]| if self.a_is_landlord { s[0] } else { s[1] + s[2] };
        Some((
            o.u(role)? > 0,
            team(o.adp1_scores?) as f64,
            team(o.adp2_scores?) as f64,
            self.a_is_landlord,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentEcho {
    pub spec: AgentSpec,
    pub checkpoint_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub a: AgentEcho,
    pub b: AgentEcho,
    pub config: DuplicateConfig,
    pub deck_seeds: Vec<u64>,
    /// All-pass auctions redealt under [`BiddingProtocol::AgentA`].
    pub redeals: usize,
    /// A's team results over every game.
    pub overall: Metrics,
    /// A's own-seat results, split by the role A held.
    pub per_role: BTreeMap<String, Metrics>,
    #[serde(skip)]
    pub games: Vec<DuplicateGame>,
}

/// Team metrics for A recomputed from the game list.
pub fn duplicate_metrics(games: &[DuplicateGame]) -> Result<Metrics> {
    if games.is_empty() {
        return Err(TrainError::EmptyRecords);
    }
    let rows: Vec<Row> = games.iter().filter_map(DuplicateGame::a_result).collect();
    Ok(aggregate(games.len(), &rows))
}

fn per_role_metrics(games: &[DuplicateGame]) -> Result<BTreeMap<String, Metrics>> {
    let mut out = BTreeMap::new();
    for role in Role::ALL {
        let wanted = role == Role::Landlord;
        let records: Vec<RecordedGame> =
            games.iter().filter(|g| g.a_is_landlord == wanted).map(|g| g.game.clone()).collect();
        if !records.is_empty() {
            out.insert(role.name().to_string(), compute_metrics(&records, Subject::Role(role))?);
        }
    }
    Ok(out)
}

fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(a);
    rng.set_word_pos(u128::from(b) * 16);
    rand::Rng::random(&mut rng)
}

/// Runs `work(i)` for `i in 0..n` over `threads` workers, keeping order.
fn parallel_map<T: Send>(n: usize, threads: usize, work: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let threads = match threads {
        0 => std::thread::available_parallelism().map_or(1, |t| t.get()),
        t => t,
    }
    .min(n.max(1));
    if threads <= 1 {
        return (0..n).map(work).collect();
    }
    let chunks: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let work = &work;
                s.spawn(move || (t..n).step_by(threads).map(work).collect::<Result<Vec<T>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("match worker panicked")).collect()
    });
    let mut per_thread: Vec<std::vec::IntoIter<T>> =
        chunks.into_iter().map(|c| c.map(Vec::into_iter)).collect::<Result<_>>()?;
    Ok((0..n).map(|i| per_thread[i % threads].next().expect("one result per index")).collect())
}

/// Plays every deck twice on the same auction: first with A as landlord
/// against B as both peasants, then with the roles swapped. Both games on a
/// deck share one random stream, so identical agents make identical moves.
pub fn run_duplicate_match(a: &AgentSpec, b: &AgentSpec, cfg: &DuplicateConfig) -> Result<MatchReport> {
    if cfg.decks == 0 {
        return Err(TrainError::Config("need at least one deck".into()));
    }
    let built_a = a.build()?;
    let built_b = b.build()?;
    let per_deck = parallel_map(cfg.decks, cfg.threads, |d| play_deck(&built_a, &built_b, cfg, d))?;
    let mut deck_seeds = Vec::with_capacity(cfg.decks);
    let mut games = Vec::with_capacity(2 * cfg.decks);
    let mut redeals = 0;
    for (seed, skipped, pair) in per_deck {
        deck_seeds.push(seed);
        redeals += skipped;
        games.extend(pair);
    }
    Ok(MatchReport {
        a: AgentEcho { spec: a.clone(), checkpoint_hash: built_a.checkpoint_hash.clone() },
        b: AgentEcho { spec: b.clone(), checkpoint_hash: built_b.checkpoint_hash.clone() },
        config: cfg.clone(),
        deck_seeds,
        redeals,
        overall: duplicate_metrics(&games)?,
        per_role: per_role_metrics(&games)?,
        games,
    })
}

fn play_deck(
    a: &BuiltAgent,
    b: &BuiltAgent,
    cfg: &DuplicateConfig,
    deck: usize,
) -> Result<(u64, usize, [DuplicateGame; 2])> {
    let mut redeals = 0;
    let (seed, bids) = loop {
        let seed = mix(cfg.seed, deck as u64, redeals as u64);
        let deal = Deal::from_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1d);
        match cfg.protocol {
            BiddingProtocol::Random => break (seed, random_auction(&deal, &mut rng)),
            BiddingProtocol::AgentA => {
                let bidder = &*a.agent;
                let auction = play_auction([bidder; 3], &deal, &mut rng)?;
                match auction {
                    Some(bids) => break (seed, bids),
                    None => redeals += 1,
                }
            }
        }
    };
    let landlord = landlord_seat(&bids);
    let game = |a_is_landlord: bool| -> Result<DuplicateGame> {
        let (lord, peasants) = if a_is_landlord { (&*a.agent, &*b.agent) } else { (&*b.agent, &*a.agent) };
        let mut seats = [peasants; 3];
        seats[landlord] = lord;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x91a7);
        Ok(DuplicateGame { deck, a_is_landlord, game: play_game(seats, seed, Some(&bids), &mut rng)? })
    };
    Ok((seed, redeals, [game(true)?, game(false)?]))
}

/// Runs the agents' auction; `None` if everyone passed.
fn play_auction(seats: [&dyn Agent; 3], deal: &Deal, rng: &mut ChaCha8Rng) -> Result<Option<Vec<u8>>> {
    let mut state = BidState::new(deal.clone());
    let mut bids = Vec::new();
    loop {
        let bid = seats[state.to_act()].bid(&state, rng)?;
        bids.push(bid);
        match state.step_bid(bid)? {
            BidStep::Bidding(next) => state = next,
            BidStep::Play(_) => return Ok(Some(bids)),
            BidStep::Draw(_) => return Ok(None),
        }
    }
}

/// Seat of the highest bid in a completed auction; seat 0 bids first.
fn landlord_seat(bids: &[u8]) -> usize {
    let top = *bids.iter().max().expect("non-empty auction");
    bids.iter().position(|&b| b == top).expect("max is present")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidExperimentReport {
    pub bidders: Vec<AgentEcho>,
    pub card_agent: AgentEcho,
    pub games: usize,
    pub seed: u64,
    pub deck_seeds: Vec<u64>,
    /// Indexed by seat.
    pub per_seat: Vec<Metrics>,
    pub dr: f64,
    #[serde(skip)]
    pub records: Vec<RecordedGame>,
}

/// Seats bid with their own agents; `card_agent` then plays every seat.
pub fn run_bid_experiment(
    bidders: &[AgentSpec; 3],
    card_agent: &AgentSpec,
    games: usize,
    seed: u64,
    threads: usize,
) -> Result<BidExperimentReport> {
    if games == 0 {
        return Err(TrainError::Config("need at least one game".into()));
    }
    let built: Vec<BuiltAgent> = bidders.iter().map(AgentSpec::build).collect::<Result<_>>()?;
    let card = card_agent.build()?;
    let deck_seeds: Vec<u64> = (0..games as u64).map(|g| mix(seed, g, 0)).collect();
    let records = parallel_map(games, threads, |g| {
        let deal = Deal::from_seed(deck_seeds[g]);
        let mut rng = ChaCha8Rng::seed_from_u64(deck_seeds[g] ^ 0xb1d);
        let seats = [&*built[0].agent, &*built[1].agent, &*built[2].agent];
        match play_auction(seats, &deal, &mut rng)? {
            Some(bids) => play_game([&*card.agent; 3], deck_seeds[g], Some(&bids), &mut rng),
            None => play_game(seats, deck_seeds[g], None, &mut ChaCha8Rng::seed_from_u64(deck_seeds[g] ^ 0xb1d)),
        }
    })?;
    let per_seat = (0..3).map(|s| compute_metrics(&records, Subject::Seat(s))).collect::<Result<Vec<_>>>()?;
    let dr = per_seat[0].dr;
    let echo = |spec: &AgentSpec, b: &BuiltAgent| AgentEcho { spec: spec.clone(), checkpoint_hash: b.checkpoint_hash.clone() };
    Ok(BidExperimentReport {
        bidders: bidders.iter().zip(&built).map(|(s, b)| echo(s, b)).collect(),
        card_agent: echo(card_agent, &card),
        games,
        seed,
        deck_seeds,
        per_seat,
        dr,
        records,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

const CSV_HEADER: &str = "row,games,decided,wp,wp_ci,adp1,adp1_ci,adp2,adp2_ci,lp,dr";

fn csv_row(out: &mut String, name: &str, m: &Metrics) {
    let _ = writeln!(
        out,
        "{name},{},{},{},{},{},{},{},{},{:.6},{:.6}",
        m.games,
        m.decided,
        opt(m.wp),
        opt(m.wp_ci),
        opt(m.adp1),
        opt(m.adp1_ci),
        opt(m.adp2),
        opt(m.adp2_ci),
        m.lp,
        m.dr
    );
}

impl MatchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# a={} b={} decks={} seed={}\n{CSV_HEADER}\n", self.a.spec.label, self.b.spec.label, self.config.decks, self.config.seed);
        csv_row(&mut out, "overall", &self.overall);
        for (role, m) in &self.per_role {
            csv_row(&mut out, role, m);
        }
        out
    }

    /// Game logs in the text record format, separated by blank lines.
    pub fn game_logs(&self) -> String {
        self.games.iter().map(|g| format!("# deck {} a_is_landlord {}\n{}\n", g.deck, g.a_is_landlord, g.game.record)).collect()
    }
}

impl BidExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("# games={} seed={}\n{CSV_HEADER}\n", self.games, self.seed);
        for (s, m) in self.per_seat.iter().enumerate() {
            csv_row(&mut out, &format!("seat{s}"), m);
        }
        out
    }
}
