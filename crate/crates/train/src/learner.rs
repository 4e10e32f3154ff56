//! The actor/learner loop.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use ddz_core::PolicyConfig;
use ddz_model::{LossReport, LossWeights, Network, Optimizer, Position};
use parking_lot::RwLock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{Agent, NetAgent, UniformRandom};
use crate::arena::play_game;
use crate::buffer::TrajectoryBuffer;
use crate::config::TrainConfig;
use crate::episode::{play_episode, Assembled, EpisodeConfig, Transition};
use crate::error::{Result, TrainError};
use crate::netset::NetSet;

/// Seeds for the fixed probe deals, independent of the run seed so probes
/// from different runs are comparable.
const PROBE_SEED: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone)]
pub struct ProbePoint {
    pub frames: u64,
    pub win_rate: f64,
    pub checkpoint: PathBuf,
}

#[derive(Debug)]
pub struct TrainingSummary {
    pub frames: u64,
    pub episodes: u64,
    pub draws: u64,
    pub probes: Vec<ProbePoint>,
    pub nets: NetSet,
}

/// Landlord win rate of `nets` holding seat 0 with a bid of 3 against
/// uniformly random peasants, over `games` fixed deals.
pub fn probe_win_rate(nets: &NetSet, policy: PolicyConfig, games: usize) -> Result<f64> {
    if games == 0 {
        return Ok(f64::NAN);
    }
    let learner = NetAgent { nets: nets.clone(), policy };
    let wins = (0..games as u64)
        .map(|g| {
            let seats: [&dyn Agent; 3] = [&learner, &UniformRandom, &UniformRandom];
            let mut rng = ChaCha8Rng::seed_from_u64(PROBE_SEED ^ g);
            let game = play_game(seats, PROBE_SEED.wrapping_add(g), Some(&[3]), &mut rng)?;
            Ok(u64::from(game.outcome.result == ddz_core::GameResult::LandlordWin))
        })
        .sum::<Result<u64>>()?;
    Ok(wins as f64 / games as f64)
}

struct Learner {
    nets: Vec<Network>,
    optimizers: Vec<Optimizer>,
    weights: LossWeights,
    last: [Option<LossReport>; 6],
}

impl Learner {
    fn step(&mut self, position: Position, batch: &[Transition]) -> Result<Arc<Network>> {
        let i = position.index();
        let data = Assembled::new(batch);
        let report = self.nets[i].train_step(&data.input(), &data.targets, &self.weights, &mut self.optimizers[i])?;
        self.last[i] = Some(report);
        Ok(Arc::new(self.nets[i].clone()))
    }
}

struct Metrics {
    out: BufWriter<File>,
}

impl Metrics {
    fn create(path: &Path) -> Result<Metrics> {
        let mut out = BufWriter::new(File::create(path)?);
        let mut header = vec!["frame".to_string()];
        for p in Position::ALL {
            for c in ["L", "L_p", "L_q"] {
                header.push(format!("{}_{c}", p.name()));
            }
        }
        header.push("frames_per_second".into());
        header.push("probe_wp".into());
        writeln!(out, "{}", header.join(","))?;
        Ok(Metrics { out })
    }

    fn row(&mut self, frames: u64, last: &[Option<LossReport>; 6], fps: f64, probe: Option<f64>) -> Result<()> {
        let mut cells = vec![frames.to_string()];
        for r in last {
            match r {
                Some(r) => cells.extend([r.total, r.l_p, r.l_q].map(|v| format!("{v:.6}"))),
                None => cells.extend(["", "", ""].map(String::from)),
            }
        }
        cells.push(format!("{fps:.1}"));
        cells.push(probe.map(|p| format!("{p:.4}")).unwrap_or_default());
        writeln!(self.out, "{}", cells.join(","))?;
        self.out.flush()?;
        Ok(())
    }
}

struct Run<'a> {
    cfg: &'a TrainConfig,
    dir: &'a Path,
    metrics: Metrics,
    probes: Vec<ProbePoint>,
    started: Instant,
    next_checkpoint: u64,
}

impl Run<'_> {
    fn checkpoint(&mut self, nets: &NetSet, frames: u64, learner: &Learner) -> Result<()> {
        let path = self.dir.join(format!("ckpt_{frames}.bin"));
        let mut ck = nets.to_checkpoint(frames);
        ck.metadata.insert("seed".into(), self.cfg.seed.to_string());
        ck.metadata.insert("config".into(), self.cfg.to_toml());
        ck.save(&path)?;
        let wp = probe_win_rate(nets, self.cfg.policy, self.cfg.probe_games)?;
        self.probes.push(ProbePoint { frames, win_rate: wp, checkpoint: path });
        let fps = frames as f64 / self.started.elapsed().as_secs_f64().max(1e-9);
        self.metrics.row(frames, &learner.last, fps, Some(wp))?;
        if self.cfg.checkpoint_every > 0 {
            while self.next_checkpoint <= frames {
                self.next_checkpoint += self.cfg.checkpoint_every;
            }
        } else {
            self.next_checkpoint = u64::MAX;
        }
        Ok(())
    }
}

fn episode_seed(run_seed: u64, episode: u64) -> u64 {
    run_seed.wrapping_mul(0x2545_f491_4f6c_dd1d).wrapping_add(episode)
}

/// Trains all six networks until `total_frames` transitions have been
/// consumed, writing `ckpt_<frames>.bin` files and `metrics.csv` into
/// `dir`. A checkpoint is written before the first update, every
/// `checkpoint_every` frames and at the end.
pub fn run_training(cfg: &TrainConfig, dir: &Path) -> Result<TrainingSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let (card, bid) = cfg.net_size.configs();
    let initial = NetSet::random(&card, &bid, cfg.seed)?;
    let opt = cfg.optimizer_config()?;
    let mut learner = Learner {
        nets: Position::ALL.iter().map(|&p| (**initial.net(p)).clone()).collect(),
        optimizers: Position::ALL
            .iter()
            .map(|_| Optimizer::new(opt).with_max_grad_norm(cfg.max_grad_norm))
            .collect(),
        weights: cfg.loss_weights(),
        last: Default::default(),
    };
    let mut run = Run {
        cfg,
        dir,
        metrics: Metrics::create(&dir.join("metrics.csv"))?,
        probes: Vec::new(),
        started: Instant::now(),
        next_checkpoint: 0,
    };
    run.checkpoint(&initial, 0, &learner)?;

    let buffer = TrajectoryBuffer::new(cfg.buffer_capacity);
    let mut sample_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let explore = cfg.exploration();
    let episode_cfg = |frames: u64| EpisodeConfig {
        epsilon: explore.at(frames),
        policy: cfg.policy,
        reward_scale: cfg.reward_scale,
    };
    let mut frames = 0u64;
    let (nets, episodes, draws);

    if cfg.actors == 0 {
        let mut current = initial;
        let mut ep_count = 0u64;
        let mut draw_count = 0u64;
        while frames < cfg.total_frames {
            if let Some(p) = buffer.ready(cfg.batch_size) {
                let batch = buffer.take(p, cfg.batch_size, &mut sample_rng).expect("ready");
                current.replace(learner.step(p, &batch)?);
                frames += batch.len() as u64;
                if frames >= run.next_checkpoint && frames < cfg.total_frames {
                    run.checkpoint(&current, frames, &learner)?;
                }
                continue;
            }
            let ep = play_episode(&current, &episode_cfg(frames), episode_seed(cfg.seed, ep_count))?;
            ep_count += 1;
            draw_count += u64::from(ep.draws);
            buffer.push_episode(ep.transitions);
        }
        (nets, episodes, draws) = (current, ep_count, draw_count);
    } else {
        let shared = RwLock::new(initial);
        let shared_frames = AtomicU64::new(0);
        let next_episode = AtomicU64::new(0);
        let draw_count = AtomicU64::new(0);
        let outcome: Result<()> = std::thread::scope(|s| {
            let mut handles = Vec::new();
            for _ in 0..cfg.actors {
                handles.push(s.spawn(|| -> Result<()> {
                    loop {
                        let snapshot = shared.read().clone();
                        let e = next_episode.fetch_add(1, Ordering::Relaxed);
                        let ecfg = episode_cfg(shared_frames.load(Ordering::Relaxed));
                        let ep = match play_episode(&snapshot, &ecfg, episode_seed(cfg.seed, e)) {
                            Ok(ep) => ep,
                            Err(err) => {
                                buffer.close();
                                return Err(err);
                            }
                        };
                        draw_count.fetch_add(u64::from(ep.draws), Ordering::Relaxed);
                        if !buffer.push_episode(ep.transitions) {
                            return Ok(());
                        }
                    }
                }));
            }
            let learned = (|| -> Result<()> {
                while frames < cfg.total_frames {
                    let Some((p, batch)) = buffer.take_ready(cfg.batch_size, &mut sample_rng) else {
                        return Ok(());
                    };
                    let snapshot = learner.step(p, &batch)?;
                    shared.write().replace(snapshot);
                    frames += batch.len() as u64;
                    shared_frames.store(frames, Ordering::Relaxed);
                    if frames >= run.next_checkpoint && frames < cfg.total_frames {
                        let current = shared.read().clone();
                        run.checkpoint(&current, frames, &learner)?;
                    }
                }
                Ok(())
            })();
            buffer.close();
            for h in handles {
                h.join().expect("actor thread panicked")?;
            }
            learned
        });
        outcome?;
        if frames < cfg.total_frames {
            return Err(TrainError::Config("actors stopped before training finished".into()));
        }
        nets = shared.into_inner();
        episodes = next_episode.into_inner();
        draws = draw_count.into_inner();
    }

    run.checkpoint(&nets, frames, &learner)?;
    Ok(TrainingSummary { frames, episodes, draws, probes: run.probes, nets })
}
