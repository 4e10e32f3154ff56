//! Acceptance run: one PASS/FAIL line per headline criterion.
//!
//! The training criterion trains `configs/desk.toml` from scratch, which
//! takes a while. Point `DDZ_ACCEPTANCE_RUN` at a directory previously
//! produced by `ddz train configs/desk.toml` to evaluate that run instead.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ddz_core::actions::{all_actions, beats, category_counts, enumerate_all_actions, legal_actions};
use ddz_core::encoding::{self, BID_ROWS, PART_B_WIDTH, PLAY_ROWS, WIDTH};
use ddz_core::game::{score_adp1, score_adp2};
use ddz_core::policy::{cut_set, select};
use ddz_core::{
    Action, CardMultiset, Category, Deal, GameOutcome, GameResult, GameState, PerActionEstimate, PolicyConfig,
    PolicyMode, Rank, RewardFactors, TrickContext,
};
use ddz_model::{loss, Input, LossWeights, NetConfig, NetKind, Network, Position, StageSpec, Target};
use ddz_train::agents::ScriptedBidder;
use ddz_train::learner::probe_win_rate;
use ddz_train::{run_bid_experiment, run_duplicate_match, run_training, AgentSpec, DuplicateConfig, TrainConfig};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

const TABLE6: [(Category, usize); 15] = [
    (Category::Pass, 1),
    (Category::Solo, 15),
    (Category::Pair, 13),
    (Category::Trio, 13),
    (Category::TrioSolo, 182),
    (Category::TrioPair, 156),
    (Category::Bomb, 13),
    (Category::Rocket, 1),
    (Category::QuadSolo, 1326),
    (Category::QuadPair, 856),
    (Category::ChainSolo, 36),
    (Category::ChainPair, 52),
    (Category::Plane, 45),
    (Category::PlaneSolo, 21822),
    (Category::PlanePair, 2939),
];

fn action_space() -> Outcome {
    let start = Instant::now();
    let actions = enumerate_all_actions();
    let elapsed = start.elapsed().as_secs_f64();
    let counts = category_counts();
    let mut wrong = Vec::new();
    for (cat, want) in TABLE6 {
        let got = actions.iter().filter(|a| a.category == cat).count();
        let listed = counts.iter().find(|(c, _)| *c == cat).map_or(0, |(_, n)| *n);
        if got != want || listed != want {
            wrong.push(format!("{} {got} (table {want})", cat.name()));
        }
    }
    let detail = format!("{} actions in {elapsed:.2}s", actions.len());
    if wrong.is_empty() && elapsed < 10.0 {
        Ok(detail)
    } else {
        Err(format!("{detail}; mismatches: {}", wrong.join(", ")))
    }
}

fn random_hand(rng: &mut ChaCha8Rng) -> CardMultiset {
    let mut deck: Vec<Rank> = Rank::all().flat_map(|r| std::iter::repeat_n(r, r.copies() as usize)).collect();
    let mut hand = CardMultiset::empty();
    for _ in 0..rng.random_range(1..=20) {
        let i = rng.random_range(0..deck.len());
        hand.add_rank(deck.swap_remove(i), 1);
    }
    hand
}

fn legality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1_000);
    let everything = all_actions();
    let non_pass: Vec<&Action> = everything.iter().filter(|a| !a.is_pass()).collect();
    let mut bad = 0;
    let pairs = 1_000;
    for _ in 0..pairs {
        let hand = random_hand(&mut rng);
        let ctx = if rng.random_bool(0.3) {
            TrickContext::leading()
        } else {
            TrickContext::following(**non_pass.choose(&mut rng).unwrap())
        };
        let brute: Vec<Action> = everything
            .iter()
            .filter(|a| a.cards.is_subset_of(&hand))
            .filter(|a| match &ctx.lead {
                None => !a.is_pass(),
                Some(lead) => a.is_pass() || beats(a, lead),
            })
            .copied()
            .collect();
        bad += usize::from(legal_actions(&hand, &ctx) != brute);
    }
    ensure(bad == 0, format!("{bad} discrepancies over {pairs} pairs"))
}

fn outcome(landlord_wins: bool, bid: u8, bombs: u8, spring: bool) -> GameOutcome {
    let u: i8 = if landlord_wins { 1 } else { -1 };
    GameOutcome {
        result: if landlord_wins { GameResult::LandlordWin } else { GameResult::PeasantWin },
        landlord_seat: Some(0),
        bids_by_seat: [bid as i8, 0, 0],
        bid_score: bid,
        bomb_count: bombs,
        spring,
        per_role_u: Some([u, -u, -u]),
        adp1_scores: None,
        adp2_scores: None,
    }
}

fn scoring() -> Outcome {
    let win = score_adp2(&outcome(true, 3, 2, false)).map_err(|e| e.to_string())?;
    let loss = score_adp2(&outcome(false, 3, 2, false)).map_err(|e| e.to_string())?;
    if win != [24, -12, -12] || loss != [-24, 12, 12] {
        return Err(format!("worked example gave {win:?} / {loss:?}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2_000);
    let n = 10_000;
    for _ in 0..n {
        let (w, bid, bombs, spring) =
            (rng.random_bool(0.5), rng.random_range(1..=3u8), rng.random_range(0..=14u8), rng.random_bool(0.2));
        let o = outcome(w, bid, bombs, spring);
        let sign = if w { 1i64 } else { -1 };
        let mut doubling = 1i64;
        for _ in 0..bombs {
            doubling *= 2;
        }
        let spring_factor = if spring { 2 } else { 1 };
        let adp2_peasant = -sign * i64::from(bid) * doubling * spring_factor;
        let adp1_peasant = -sign * doubling;
        let want2 = [-2 * adp2_peasant, adp2_peasant, adp2_peasant];
        let want1 = [-2 * adp1_peasant, adp1_peasant, adp1_peasant];
        let (got1, got2) = (score_adp1(&o).unwrap(), score_adp2(&o).unwrap());
        if got1 != want1 || got2 != want2 || got1.iter().sum::<i64>() != 0 || got2.iter().sum::<i64>() != 0 {
            return Err(format!("{o:?}: adp1 {got1:?} vs {want1:?}, adp2 {got2:?} vs {want2:?}"));
        }
    }
    Ok(format!("worked example +-24/+-12; {n} random outcomes agree and sum to zero"))
}

fn encoding_shapes() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3_000);
    let mut states = 0usize;
    for seed in 0..100u64 {
        let mut state = GameState::new(Deal::from_seed(seed));
        loop {
            states += 1;
            state = match &state {
                GameState::Bidding(b) => {
                    let (obs, bids) = encoding::encode_bid(b).map_err(|e| e.to_string())?;
                    if obs.batch != bids.len() || obs.data.len() != bids.len() * BID_ROWS * WIDTH || BID_ROWS != 5 {
                        return Err(format!("bid observation shape off at seed {seed}"));
                    }
                    state.apply_bid(*bids.choose(&mut rng).unwrap()).unwrap()
                }
                GameState::Playing(p) => {
                    let legal = p.legal_actions();
                    let obs = encoding::encode_play(p, &legal).map_err(|e| e.to_string())?;
                    let n = legal.len();
                    if obs.batch != n
                        || obs.part_a.len() != n * PLAY_ROWS * WIDTH
                        || obs.part_b.len() != n * PART_B_WIDTH
                        || (PLAY_ROWS, PART_B_WIDTH, WIDTH) != (72, 18, 54)
                    {
                        return Err(format!("play observation shape off at seed {seed}"));
                    }
                    state.apply_play(*legal.choose(&mut rng).unwrap()).unwrap()
                }
                GameState::Finished(_) => break,
            };
        }
    }
    let card = NetConfig::card_full();
    let bid = NetConfig::bid_full();
    let widths = (card.flatten_width(), card.head_input_width(), bid.head_input_width());
    ensure(
        widths == (2016, 2088, 140),
        format!("{states} states checked; flatten/head widths {widths:?}"),
    )
}

/// Win rate, Q_w, Q_l and Q for the ten bidding situations of the case study.
const BID_TABLE: [(f64, f64, f64, f64); 10] = [
    (0.2724, 4.4712, -5.7912, -2.9976),
    (0.1122, 3.7488, -5.8030, -4.7328),
    (0.1203, 3.8616, -6.0600, -4.8672),
    (0.2407, 3.3096, -4.3200, -2.4816),
    (0.5154, 9.3168, -7.7808, 1.0296),
    (0.4742, 9.4392, -7.8432, 0.3528),
    (0.4378, 8.5080, -7.5552, -0.5232),
    (0.4907, 9.4536, -7.6920, 0.7200),
    (0.4281, 7.9008, -7.1016, -0.6792),
    (0.2477, 2.2656, -2.7432, -1.5024),
];

fn scalar_loss(est: &[PerActionEstimate], t: &[Target], w: &LossWeights) -> f64 {
    let n = est.len() as f64;
    let l_p = est.iter().zip(t).map(|(e, t)| (e.p - f64::from(t.u)).powi(2)).sum::<f64>() / n;
    let mut l_q = 0.0;
    for side in [1i8, -1] {
        let rows: Vec<f64> = est
            .iter()
            .zip(t)
            .filter(|(_, t)| t.u == side)
            .map(|(e, t)| (if side == 1 { e.q_w } else { e.q_l } - t.r).powi(2))
            .collect();
        if !rows.is_empty() {
            l_q += rows.len() as f64 / n * (rows.iter().sum::<f64>() / rows.len() as f64);
        }
    }
    w.alpha1 * l_p + w.alpha2 * l_q
}

fn tiny_net() -> Network {
    let cfg = NetConfig {
        kind: NetKind::Card,
        input_channels: 3,
        input_width: 54,
        stages: vec![StageSpec { channels: 3, blocks: 1 }, StageSpec { channels: 2, blocks: 1 }],
        part_b_width: 4,
        part_b_repeat: 2,
        hidden: vec![6],
    };
    Network::new(cfg, Position::Landlord, 5).unwrap()
}

fn factorization() -> Outcome {
    let mut worst_q = 0.0f64;
    for &(wr, qw, ql, q) in &BID_TABLE {
        worst_q = worst_q.max((PerActionEstimate::from_win_rate(wr, qw, ql).q() - q).abs());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(5_000);
    let mut worst_loss = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let est: Vec<_> = (0..n)
            .map(|_| PerActionEstimate::new(rng.random_range(-1.0..1.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)))
            .collect();
        let t: Vec<_> = (0..n)
            .map(|_| Target { u: if rng.random_bool(0.5) { 1 } else { -1 }, r: rng.random_range(-3.0..3.0) })
            .collect();
        let w = LossWeights { alpha1: rng.random_range(0.1..2.0), alpha2: rng.random_range(0.1..2.0) };
        let got = loss(&est, &t, &w).map_err(|e| e.to_string())?.total;
        worst_loss = worst_loss.max((got - scalar_loss(&est, &t, &w)).abs());
    }

    let mut net = tiny_net();
    for p in net.params_mut() {
        if *p == 0.0 {
            *p = rng.random_range(-0.1..0.1);
        }
    }
    let cfg = net.config().clone();
    let n = 4;
    let planes: Vec<f32> = (0..n * cfg.slice_len()).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let extra: Vec<f32> = (0..n * cfg.part_b_width).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let targets: Vec<Target> = (0..n).map(|i| Target { u: if i % 2 == 0 { 1 } else { -1 }, r: 0.5 - i as f64 }).collect();
    let input = Input { n, planes: &planes, extra: &extra };
    let w = LossWeights { alpha1: 0.8, alpha2: 1.2 };
    let (_, grads) = net.loss_and_grad(&input, &targets, &w).map_err(|e| e.to_string())?;
    let h = 1e-6;
    let mut worst_grad = 0.0f64;
    for i in 0..net.num_params() {
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let plus = net.loss_and_grad(&input, &targets, &w).unwrap().0.total;
        net.params_mut()[i] = orig - h;
        let minus = net.loss_and_grad(&input, &targets, &w).unwrap().0.total;
        net.params_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        worst_grad = worst_grad.max((numeric - grads[i]).abs() / numeric.abs().max(grads[i].abs()).max(1e-5));
    }
    ensure(
        worst_q <= 0.02 && worst_loss <= 1e-10 && worst_grad <= 1e-4,
        format!("Q rows max err {worst_q:.4}; loss max err {worst_loss:e}; gradient max rel err {worst_grad:e}"),
    )
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn policy_rule() -> Outcome {
    const NONE: RewardFactors = RewardFactors { spring_still_possible: false, bombs_possibly_remaining: false };
    let mut rng = ChaCha8Rng::seed_from_u64(6_000);
    let vectors = 10_000;
    let mix = PolicyConfig::with_mode(PolicyMode::Mix);
    for k in 0..vectors {
        let n = rng.random_range(1..40);
        let e: Vec<PerActionEstimate> = (0..n)
            .map(|_| PerActionEstimate::new(rng.random_range(-1.0..1.0), rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0)))
            .collect();
        let best_q = argmax(e.iter().map(|x| x.q()));
        let best_wp = argmax(e.iter().map(|x| x.p_w()));
        let tiny = PolicyConfig { rho: 1e-300, ..mix };
        let huge = PolicyConfig { rho: 1e300, ..mix };
        let pick = |cfg: &PolicyConfig, f: &RewardFactors| select(&e, f, cfg).unwrap();
        if pick(&tiny, &RewardFactors::BIDDING) != best_q {
            return Err(format!("vector {k}: Mix with rho -> 0 is not argmax Q"));
        }
        if pick(&huge, &RewardFactors::BIDDING) != best_wp {
            return Err(format!("vector {k}: Mix with rho -> inf is not argmax WP"));
        }
        let rho = rng.random_range(1e-6..2.0);
        if !cut_set(&e, &PolicyConfig { rho, ..mix })[best_q] {
            return Err(format!("vector {k}: argmax Q outside the cut at rho {rho}"));
        }
        for mode in [PolicyMode::BombCheck, PolicyMode::BombCheckAndMix, PolicyMode::AlphaDou] {
            if pick(&PolicyConfig::with_mode(mode), &NONE) != best_wp {
                return Err(format!("vector {k}: {mode} without reward factors is not argmax WP"));
            }
        }
        if pick(&PolicyConfig::with_mode(PolicyMode::BombCheck), &RewardFactors::BIDDING) != best_q {
            return Err(format!("vector {k}: BombCheck with live factors is not argmax Q"));
        }
    }
    Ok(format!("{vectors} random estimate vectors"))
}

fn duplicate_antisymmetry() -> Outcome {
    let cfg = DuplicateConfig { decks: 1_000, seed: 7_000, ..Default::default() };
    let r = run_duplicate_match(&AgentSpec::greedy(), &AgentSpec::greedy(), &cfg).map_err(|e| e.to_string())?;
    ensure(
        r.overall.wp == Some(0.5) && r.overall.adp1 == Some(0.0),
        format!("greedy vs greedy over {} decks: WP {:?}, ADP1 {:?}", cfg.decks, r.overall.wp, r.overall.adp1),
    )
}

fn bid_experiment() -> Outcome {
    let bidders = [AgentSpec::random(), AgentSpec::scripted(ScriptedBidder::default()), AgentSpec::random()];
    let mut worst = 0.0f64;
    for seed in 0..3 {
        let r = run_bid_experiment(&bidders, &AgentSpec::greedy(), 400, seed, 0).map_err(|e| e.to_string())?;
        let lp: f64 = r.per_seat.iter().map(|m| m.lp).sum();
        worst = worst.max((lp - (1.0 - r.dr)).abs());
    }
    let pass = AgentSpec::scripted(ScriptedBidder::always_pass());
    let all_pass = run_bid_experiment(&[pass.clone(), pass.clone(), pass], &AgentSpec::greedy(), 100, 0, 0)
        .map_err(|e| e.to_string())?;
    ensure(
        worst < 1e-12 && all_pass.dr == 1.0,
        format!("max |sum LP - (1 - DR)| {worst:e}; all-pass DR {}", all_pass.dr),
    )
}

/// Probe win rates and final checkpoint of a finished run.
struct RunResult {
    frames: u64,
    probes: Vec<(u64, f64)>,
    last_checkpoint: PathBuf,
}

fn desk_config() -> Result<TrainConfig, String> {
    TrainConfig::load(workspace_root().join("configs/desk.toml")).map_err(|e| e.to_string())
}

fn read_existing_run(dir: &Path, want: &TrainConfig) -> Result<RunResult, String> {
    let used = TrainConfig::load(dir.join("config.toml")).map_err(|e| e.to_string())?;
    let strip = |c: TrainConfig| TrainConfig { output_dir: String::new(), ..c };
    if strip(used) != strip(want.clone()) {
        return Err(format!("{} was trained with a different config", dir.display()));
    }
    let csv = std::fs::read_to_string(dir.join("metrics.csv")).map_err(|e| e.to_string())?;
    let probes: Vec<(u64, f64)> = csv
        .lines()
        .skip(1)
        .filter_map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            Some((cells[0].parse().ok()?, cells.last()?.parse().ok()?))
        })
        .collect();
    let last_checkpoint = ddz_cli::latest_checkpoint(dir).ok_or("no checkpoints")?;
    let frames = probes.last().map_or(0, |p| p.0);
    Ok(RunResult { frames, probes, last_checkpoint })
}

fn desk_training() -> Vec<(&'static str, Outcome)> {
    let cfg = match desk_config() {
        Ok(cfg) => cfg,
        Err(e) => return vec![("desk-scale training", Err(e))],
    };
    let scratch = tempfile::tempdir().expect("tempdir");
    let run = match std::env::var_os("DDZ_ACCEPTANCE_RUN") {
        Some(dir) => read_existing_run(Path::new(&dir), &cfg),
        None => {
            let started = Instant::now();
            let r = run_training(&cfg, scratch.path()).map_err(|e| e.to_string());
            eprintln!("desk training took {:.0}s", started.elapsed().as_secs_f64());
            r.map(|s| RunResult {
                frames: s.frames,
                probes: s.probes.iter().map(|p| (p.frames, p.win_rate)).collect(),
                last_checkpoint: s.probes.last().expect("final checkpoint").checkpoint.clone(),
            })
        }
    };
    let run = match run {
        Ok(run) => run,
        Err(e) => return vec![("desk-scale training", Err(e))],
    };

    let wp = (|| {
        let a = AgentSpec::checkpoint(&run.last_checkpoint, PolicyConfig::default());
        let dcfg = DuplicateConfig { decks: 1_000, seed: 8_000, ..Default::default() };
        let r = run_duplicate_match(&a, &AgentSpec::random(), &dcfg).map_err(|e| e.to_string())?;
        let wp = r.overall.wp.unwrap_or(0.0);
        ensure(
            run.frames >= 500_000 && wp >= 0.7,
            format!("{} frames; WP {wp:.4} +- {:.4} vs random over {} decks", run.frames, r.overall.wp_ci.unwrap_or(0.0), dcfg.decks),
        )
    })();

    let probes = match (run.probes.first(), run.probes.last()) {
        (Some(first), Some(last)) if run.probes.len() >= 2 => ensure(
            last.1 > first.1,
            format!("probe win rate {:.4} at frame {} -> {:.4} at frame {}", first.1, first.0, last.1, last.0),
        ),
        _ => Err("fewer than two checkpoints".into()),
    };

    let rerun = (|| {
        let small = TrainConfig {
            total_frames: 4_000,
            checkpoint_every: 2_000,
            batch_size: 256,
            buffer_capacity: 4_096,
            probe_games: 10,
            actors: 0,
            ..cfg.clone()
        };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let sa = run_training(&small, a.path()).map_err(|e| e.to_string())?;
        let sb = run_training(&small, b.path()).map_err(|e| e.to_string())?;
        let same = sa.probes.len() == sb.probes.len()
            && sa.probes.iter().zip(&sb.probes).all(|(x, y)| {
                std::fs::read(&x.checkpoint).unwrap() == std::fs::read(&y.checkpoint).unwrap()
            });
        let probe = probe_win_rate(&sa.nets, small.policy, 10).map_err(|e| e.to_string())?;
        ensure(same, format!("{} checkpoints compared byte for byte; probe {probe:.2}", sa.probes.len()))
    })();

    vec![
        ("desk-scale training beats random", wp),
        ("desk-scale probe improves", probes),
        ("deterministic rerun is bit-identical", rerun),
    ]
}

fn main() {
    let single: [(&str, fn() -> Outcome); 8] = [
        ("action-space counts", action_space),
        ("legality vs brute force", legality),
        ("scoring", scoring),
        ("encoding shapes", encoding_shapes),
        ("factorization math", factorization),
        ("policy rule", policy_rule),
        ("duplicate antisymmetry", duplicate_antisymmetry),
        ("bid-experiment harness", bid_experiment),
    ];
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    for (name, f) in single {
        let r = catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        results.push((name, r));
    }
    match catch_unwind(AssertUnwindSafe(desk_training)) {
        Ok(rows) => results.extend(rows),
        Err(_) => results.push(("desk-scale training", Err("panicked".into()))),
    }

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
