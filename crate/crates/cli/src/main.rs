use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use ddz_cli::inspect::{evaluate, parse_state_file, render};
use ddz_cli::service::{self, ServiceConfig};
use ddz_cli::{category_table, latest_checkpoint, CHECKPOINT_DIR_ENV};
use ddz_core::{GameState, PolicyConfig, PolicyMode};
use ddz_train::agents::AgentSpec;
use ddz_train::arena::{run_bid_experiment, run_duplicate_match, BiddingProtocol, DuplicateConfig};
use ddz_train::{run_training, NetSet, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "ddz", version, about = "Doudizhu self-play training, evaluation and play")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the six position networks from a TOML config.
    Train {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an evaluation match.
    #[command(subcommand)]
    Eval(Eval),
    /// Print the number of distinct actions per category.
    Enumerate,
    /// Play a game in the terminal against agents.
    Play {
        /// Opponent spec: random, greedy, scripted, or a checkpoint path
        /// (`latest` picks the newest in $DDZ_CHECKPOINT_DIR).
        #[arg(long, default_value = "greedy")]
        opponent: String,
        #[arg(long, default_value_t = 0)]
        seat: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Start the HTTP game service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Defaults to $DDZ_CHECKPOINT_DIR.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        /// Let human seats request estimates for their own options.
        #[arg(long)]
        coach: bool,
    },
    /// Show the estimates behind every option at a recorded position.
    Inspect {
        checkpoint: String,
        state_file: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::AlphaDou)]
        mode: Mode,
    },
}

#[derive(Subcommand)]
enum Eval {
    /// Duplicate-deck match between two agents.
    Duplicate {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 4000)]
        decks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `random` auctions, or agent A bidding for every seat.
        #[arg(long, value_enum, default_value_t = Protocol::Random)]
        bidding: Protocol,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    /// Seat-by-seat bidding experiment with a fixed card player.
    Bid {
        #[arg(long, num_args = 3, value_names = ["SEAT0", "SEAT1", "SEAT2"])]
        bidders: Vec<String>,
        #[arg(long)]
        card: String,
        #[arg(long, default_value_t = 4000)]
        games: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    Random,
    Agent,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    MaxQ,
    MaxWp,
    BombCheck,
    Mix,
    BombCheckAndMix,
    AlphaDou,
}

impl From<Mode> for PolicyMode {
    fn from(m: Mode) -> PolicyMode {
        match m {
            Mode::MaxQ => PolicyMode::MaxQ,
            Mode::MaxWp => PolicyMode::MaxWP,
            Mode::BombCheck => PolicyMode::BombCheck,
            Mode::Mix => PolicyMode::Mix,
            Mode::BombCheckAndMix => PolicyMode::BombCheckAndMix,
            Mode::AlphaDou => PolicyMode::AlphaDou,
        }
    }
}

fn checkpoint_dir() -> Option<PathBuf> {
    std::env::var_os(CHECKPOINT_DIR_ENV).map(PathBuf::from)
}

/// Expands a leading `latest` to the newest checkpoint in the default
/// directory.
fn resolve(spec: &str) -> anyhow::Result<String> {
    let (head, tail) = spec.split_once('@').map_or((spec, None), |(h, t)| (h, Some(t)));
    if head != "latest" {
        return Ok(spec.to_string());
    }
    let dir = checkpoint_dir().with_context(|| format!("`latest` needs ${CHECKPOINT_DIR_ENV}"))?;
    let path = latest_checkpoint(&dir).with_context(|| format!("no checkpoints in {}", dir.display()))?;
    Ok(match tail {
        Some(t) => format!("{}@{t}", path.display()),
        None => path.display().to_string(),
    })
}

fn agent(spec: &str) -> anyhow::Result<AgentSpec> {
    Ok(resolve(spec)?.parse()?)
}

fn write_opt(path: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Train { config, out } => {
            let cfg = TrainConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            let summary = run_training(&cfg, &dir)?;
            for p in &summary.probes {
                println!("frames {:>9}  probe_wp {:.4}  {}", p.frames, p.win_rate, p.checkpoint.display());
            }
            println!("episodes {} draws {}", summary.episodes, summary.draws);
        }
        Command::Eval(Eval::Duplicate { a, b, decks, seed, bidding, threads, csv, logs }) => {
            let protocol = match bidding {
                Protocol::Random => BiddingProtocol::Random,
                Protocol::Agent => BiddingProtocol::AgentA,
            };
            let cfg = DuplicateConfig { decks, seed, protocol, threads };
            let report = run_duplicate_match(&agent(&a)?, &agent(&b)?, &cfg)?;
            println!("{}", report.to_json());
            write_opt(&csv, &report.to_csv())?;
            write_opt(&logs, &report.game_logs())?;
        }
        Command::Eval(Eval::Bid { bidders, card, games, seed, threads, csv }) => {
            let specs: Vec<AgentSpec> = bidders.iter().map(|s| agent(s)).collect::<anyhow::Result<_>>()?;
            let specs: [AgentSpec; 3] = specs.try_into().map_err(|_| anyhow::anyhow!("need three bidders"))?;
            let report = run_bid_experiment(&specs, &agent(&card)?, games, seed, threads)?;
            println!("{}", report.to_json());
            write_opt(&csv, &report.to_csv())?;
        }
        Command::Enumerate => print!("{}", category_table()),
        Command::Play { opponent, seat, seed } => play(&agent(&opponent)?, seat, seed)?,
        Command::Serve { port, host, checkpoint_dir: dir, coach } => {
            let cfg = ServiceConfig { checkpoint_dir: dir.or_else(checkpoint_dir), coach };
            let addr = format!("{host}:{port}");
            tokio::runtime::Runtime::new()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await?;
                eprintln!("listening on http://{addr}");
                axum::serve(listener, service::router(cfg)).await?;
                anyhow::Ok(())
            })?;
        }
        Command::Inspect { checkpoint, state_file, mode } => {
            let path = resolve(&checkpoint)?;
            let nets = NetSet::load(Path::new(&path)).with_context(|| format!("loading {path}"))?;
            let text = std::fs::read_to_string(&state_file)?;
            let state = parse_state_file(&text)?;
            let policy = PolicyConfig::with_mode(mode.into());
            match evaluate(&nets, &state, &policy)? {
                Some(evals) => {
                    describe(&state);
                    print!("{}", render(&evals));
                }
                None => bail!("the game in {} is already over", state_file.display()),
            }
        }
    }
    Ok(())
}

fn describe(state: &GameState) {
    match state {
        GameState::Bidding(b) => println!("seat {} to bid, hand {}", b.to_act(), b.hand_to_act()),
        GameState::Playing(p) => println!("{} to play, hand {}", p.to_act.name(), p.hand(p.to_act)),
        GameState::Finished(_) => {}
    }
}

fn play(opponent: &AgentSpec, human: usize, seed: u64) -> anyhow::Result<()> {
    anyhow::ensure!(human < 3, "seat must be 0, 1 or 2");
    let bot = opponent.build()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = GameState::new(ddz_core::Deal::from_seed(seed));
    let stdin = std::io::stdin();
    let mut lines = stdin.lock().lines();
    loop {
        let seat = match state.seat_to_act() {
            Some(s) => s,
            None => break,
        };
        state = match &state {
            GameState::Bidding(b) if seat == human => {
                println!("your hand: {}   bids so far: {:?}", b.hand_to_act(), b.bids);
                let valid = b.valid_bids();
                loop {
                    print!("bid {valid:?}> ");
                    std::io::stdout().flush()?;
                    let line = lines.next().context("stdin closed")??;
                    match line.trim().parse::<u8>() {
                        Ok(v) if valid.contains(&v) => break state.apply_bid(v)?,
                        _ => println!("not a valid bid"),
                    }
                }
            }
            GameState::Bidding(b) => {
                let v = bot.agent.bid(b, &mut rng)?;
                println!("seat {seat} bids {v}");
                state.apply_bid(v)?
            }
            GameState::Playing(p) if seat == human => {
                println!("you are {}, hand {}", p.to_act.name(), p.hand(p.to_act));
                let legal = p.legal_actions();
                loop {
                    print!("play> ");
                    std::io::stdout().flush()?;
                    let line = lines.next().context("stdin closed")??;
                    let pick = line.trim().parse::<ddz_core::Action>().ok().and_then(|a| {
                        legal.iter().find(|l| l.cards == a.cards && l.is_pass() == a.is_pass()).copied()
                    });
                    match pick {
                        Some(a) => break state.apply_play(a)?,
                        None => println!("illegal; e.g. {}", legal.iter().take(6).map(ToString::to_string).collect::<Vec<_>>().join(" ")),
                    }
                }
            }
            GameState::Playing(p) => {
                let legal = p.legal_actions();
                let a = legal[bot.agent.play(p, &legal, &mut rng)?];
                println!("seat {seat} ({}) plays {a}", p.to_act.name());
                state.apply_play(a)?
            }
            GameState::Finished(_) => unreachable!(),
        };
    }
    if let GameState::Finished(o) = &state {
        match o.role_of_seat(human) {
            None => println!("everyone passed: draw"),
            Some(r) => println!("{:?}; your score {}", o.result, o.adp2_scores.map_or(0, |s| s[r.index()])),
        }
    }
    Ok(())
}
