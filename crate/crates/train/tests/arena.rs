use ddz_core::game::BidStep;
use ddz_core::{BidState, CardMultiset, Deal, GameRecord, RecordedGame};
use ddz_train::agents::{AgentSpec, ScriptedBidder};
use ddz_train::arena::{
    baseline_scripted_bidder, compute_metrics, duplicate_metrics, play_game, run_bid_experiment,
    run_duplicate_match, BiddingProtocol, DuplicateConfig, Subject,
};
use ddz_train::{TrainError, UniformRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Plays random games until one matches `want`.
fn find_game(want: impl Fn(&RecordedGame) -> bool) -> RecordedGame {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..20_000u64)
        .map(|s| play_game([&UniformRandom; 3], s, None, &mut rng).unwrap())
        .find(|g| want(g))
        .expect("a matching random game")
}

#[test]
fn two_game_example() {
    // Seat 0 wins once as landlord at stake 1 and loses once as a peasant at stake 1.
    let win = find_game(|g| {
        let o = &g.outcome;
        o.landlord_seat == Some(0) && o.u(ddz_core::Role::Landlord) == Some(1) && o.bomb_count == 0 && !o.spring
    });
    let loss = find_game(|g| {
        let o = &g.outcome;
        o.landlord_seat == Some(1) && o.u(ddz_core::Role::Landlord) == Some(1) && o.bomb_count == 0 && !o.spring
    });
    let m = compute_metrics(&[win, loss], Subject::Seat(0)).unwrap();
    assert_eq!(m.wp, Some(0.5));
    assert_eq!(m.adp1, Some(0.5));
    assert_eq!(m.lp, 0.5);
    assert_eq!(m.dr, 0.0);
}

#[test]
fn bid_two_one_bomb_landlord_win_is_eight() {
    let g = find_game(|g| {
        let o = &g.outcome;
        o.u(ddz_core::Role::Landlord) == Some(1) && o.bid_score == 2 && o.bomb_count == 1 && !o.spring
    });
    let m = compute_metrics(&[g], Subject::Role(ddz_core::Role::Landlord)).unwrap();
    assert_eq!(m.adp2, Some(8.0));
    assert_eq!(m.adp1, Some(4.0));
}

#[test]
fn all_draws_leave_rates_absent() {
    let pass = ScriptedBidder::always_pass();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let games: Vec<_> = (0..5).map(|s| play_game([&pass; 3], s, None, &mut rng).unwrap()).collect();
    let m = compute_metrics(&games, Subject::Seat(1)).unwrap();
    assert_eq!((m.dr, m.lp, m.wp, m.adp1, m.adp2), (1.0, 0.0, None, None, None));
    assert!(matches!(compute_metrics(&[], Subject::Seat(0)), Err(TrainError::EmptyRecords)));
}

#[test]
fn identical_agents_split_evenly() {
    for spec in [AgentSpec::greedy(), AgentSpec::random()] {
        let cfg = DuplicateConfig { decks: 60, seed: 4, ..Default::default() };
        let r = run_duplicate_match(&spec, &spec, &cfg).unwrap();
        assert_eq!(r.overall.wp, Some(0.5), "{}", spec.label);
        assert_eq!(r.overall.adp1, Some(0.0));
        assert_eq!(r.overall.adp2, Some(0.0));
        assert_eq!(r.games.len(), 120);
    }
}

#[test]
fn duplicate_scores_are_antisymmetric() {
    let cfg = DuplicateConfig { decks: 40, seed: 9, threads: 3, ..Default::default() };
    let ab = run_duplicate_match(&AgentSpec::greedy(), &AgentSpec::scripted(ScriptedBidder::default()), &cfg).unwrap();
    let ba = run_duplicate_match(&AgentSpec::scripted(ScriptedBidder::default()), &AgentSpec::greedy(), &cfg).unwrap();
    assert_eq!(ab.deck_seeds, ba.deck_seeds);
    let per_deck = |r: &ddz_train::MatchReport| -> Vec<f64> {
        r.games.chunks(2).map(|pair| pair.iter().map(|g| g.a_result().unwrap().1).sum()).collect()
    };
    let (x, y) = (per_deck(&ab), per_deck(&ba));
    for (a, b) in x.iter().zip(&y) {
        assert_eq!(*a, -*b);
    }
    assert_eq!(ab.overall.adp1.unwrap() + ba.overall.adp1.unwrap(), 0.0);
}

#[test]
fn greedy_beats_random() {
    let cfg = DuplicateConfig { decks: 200, seed: 1, ..Default::default() };
    let r = run_duplicate_match(&AgentSpec::greedy(), &AgentSpec::random(), &cfg).unwrap();
    println!("greedy vs random: WP {:?} ADP1 {:?}", r.overall.wp, r.overall.adp1);
    assert!(r.overall.wp.unwrap() > 0.7);
}

#[test]
fn reports_are_reproducible_and_thread_independent() {
    let one = DuplicateConfig { decks: 30, seed: 2, threads: 1, ..Default::default() };
    let four = DuplicateConfig { threads: 4, ..one.clone() };
    let a = run_duplicate_match(&AgentSpec::random(), &AgentSpec::greedy(), &one).unwrap();
    let b = run_duplicate_match(&AgentSpec::random(), &AgentSpec::greedy(), &four).unwrap();
    assert_eq!(a.games, b.games);
    assert_eq!(a.overall, b.overall);
    assert!(a.to_json().contains("deck_seeds"));
    assert!(a.to_csv().lines().nth(1).unwrap().starts_with("row,"));
}

#[test]
fn agent_bidding_protocol_redeals_all_pass_decks() {
    let cfg = DuplicateConfig { decks: 30, seed: 5, protocol: BiddingProtocol::AgentA, threads: 1 };
    let r = run_duplicate_match(&AgentSpec::scripted(ScriptedBidder::default()), &AgentSpec::greedy(), &cfg).unwrap();
    assert_eq!(r.games.len(), 60);
    assert!(r.games.iter().all(|g| !g.game.outcome.is_draw()));
    for pair in r.games.chunks(2) {
        assert_eq!(pair[0].game.record.bids, pair[1].game.record.bids);
    }
}

#[test]
fn landlord_probability_mass_matches_draw_rate() {
    let bidders = [AgentSpec::random(), AgentSpec::scripted(ScriptedBidder::default()), AgentSpec::random()];
    let r = run_bid_experiment(&bidders, &AgentSpec::greedy(), 300, 3, 0).unwrap();
    let lp: f64 = r.per_seat.iter().map(|m| m.lp).sum();
    assert!((lp - (1.0 - r.dr)).abs() < 1e-12, "{lp} vs {}", r.dr);
    assert!(r.dr > 0.0);
}

#[test]
fn passing_bidders_draw_every_game() {
    let pass = AgentSpec::scripted(ScriptedBidder::always_pass());
    let r = run_bid_experiment(&[pass.clone(), pass.clone(), pass], &AgentSpec::greedy(), 50, 0, 0).unwrap();
    assert_eq!(r.dr, 1.0);
    assert!(r.per_seat.iter().all(|m| m.wp.is_none() && m.lp == 0.0));
}

#[test]
fn metrics_recompute_from_text_logs() {
    let cfg = DuplicateConfig { decks: 50, seed: 8, ..Default::default() };
    let r = run_duplicate_match(&AgentSpec::greedy(), &AgentSpec::random(), &cfg).unwrap();
    let mut replayed = r.games.clone();
    for g in &mut replayed {
        let text = g.game.record.to_string();
        let parsed: GameRecord = text.parse().unwrap();
        g.game = RecordedGame { outcome: parsed.replay_outcome().unwrap(), record: parsed };
    }
    assert_eq!(replayed, r.games);
    let again = duplicate_metrics(&replayed).unwrap();
    assert_eq!(again.wp.map(f64::to_bits), r.overall.wp.map(f64::to_bits));
    assert_eq!(again.adp1.map(f64::to_bits), r.overall.adp1.map(f64::to_bits));
    assert_eq!(again.adp2.map(f64::to_bits), r.overall.adp2.map(f64::to_bits));
    assert_eq!(again, r.overall);
}

fn bid_for(hand: &str, before: &[u8]) -> u8 {
    let mut state = BidState::new(Deal::from_seed(0));
    for &b in before {
        state = match state.step_bid(b).unwrap() {
            BidStep::Bidding(s) => s,
            _ => unreachable!(),
        };
    }
    let seat = state.to_act();
    state.deal.hands[seat] = hand.parse::<CardMultiset>().unwrap();
    baseline_scripted_bidder(&state)
}

#[test]
fn baseline_bidder_examples() {
    assert_eq!(bid_for("BR22345678", &[]), 3);
    assert_eq!(bid_for("333444569TTJJQKK2", &[]), 0);
    assert_eq!(bid_for("BR22345678", &[2]), 3);
    assert_eq!(bid_for("2223456789TJQKA", &[2]), 0);
    // A standing 3 cannot be exceeded.
    let mut state = BidState::new(Deal::from_seed(0));
    state.bids = vec![3];
    state.deal.hands[1] = "BR22345678".parse().unwrap();
    assert_eq!(baseline_scripted_bidder(&state), 0);
}
