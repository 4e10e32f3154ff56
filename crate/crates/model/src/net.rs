use ddz_core::encoding::{BidObservation, PlayObservation};
use ddz_core::PerActionEstimate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{NetConfig, Position, OUTPUTS};
use crate::error::{ModelError, Result};
use crate::layers::{relu_in_place, relu_mask, Conv1d, Linear};
use crate::loss::{loss_gradients, LossReport, LossWeights, Target};
use crate::optim::Optimizer;

/// Observation slices for a batch of candidates: `planes` is
/// `n × channels × width`, `extra` is `n × part_b_width` (empty for bids).
#[derive(Debug, Clone, Copy)]
pub struct Input<'a> {
    pub n: usize,
    pub planes: &'a [f32],
    pub extra: &'a [f32],
}

impl<'a> From<&'a BidObservation> for Input<'a> {
    fn from(obs: &'a BidObservation) -> Self {
        Input { n: obs.batch, planes: &obs.data, extra: &[] }
    }
}

impl<'a> From<&'a PlayObservation> for Input<'a> {
    fn from(obs: &'a PlayObservation) -> Self {
        Input { n: obs.batch, planes: &obs.part_a, extra: &obs.part_b }
    }
}

#[derive(Debug, Clone)]
struct Block {
    conv1: Conv1d,
    conv2: Conv1d,
    proj: Option<Conv1d>,
    lin: usize,
    cout: usize,
}

impl Block {
    fn lout(&self) -> usize {
        self.conv1.out_len(self.lin)
    }
}

#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<Block>,
    fcs: Vec<Linear>,
    len: usize,
}

impl Layout {
    fn new(cfg: &NetConfig) -> Layout {
        let mut off = 0;
        let mut blocks = Vec::new();
        let (mut c, mut l) = (cfg.input_channels, cfg.input_width);
        for stage in &cfg.stages {
            for i in 0..stage.blocks {
                let stride = if i == 0 { 2 } else { 1 };
                let conv1 = Conv1d::new(c, stage.channels, 3, stride, &mut off);
                let conv2 = Conv1d::new(stage.channels, stage.channels, 3, 1, &mut off);
                let proj = (stride != 1 || c != stage.channels)
                    .then(|| Conv1d::new(c, stage.channels, 1, stride, &mut off));
                let block = Block { conv1, conv2, proj, lin: l, cout: stage.channels };
                l = block.lout();
                c = stage.channels;
                blocks.push(block);
            }
        }
        let mut fcs = Vec::new();
        let mut width = cfg.head_input_width();
        for &h in cfg.hidden.iter().chain(std::iter::once(&OUTPUTS)) {
            fcs.push(Linear::new(width, h, &mut off));
            width = h;
        }
        Layout { blocks, fcs, len: off }
    }
}

/// Activations kept for the backward pass.
struct Tape {
    n: usize,
    /// Input of each block plus the trunk output.
    acts: Vec<Vec<f64>>,
    /// ReLU output of each block's first conv.
    mids: Vec<Vec<f64>>,
    /// Input of each dense layer (post-ReLU except the first).
    heads: Vec<Vec<f64>>,
    /// `[n][3]` raw outputs.
    out: Vec<f64>,
}

/// One position's network with its parameters.
#[derive(Debug, Clone)]
pub struct Network {
    config: NetConfig,
    position: Position,
    layout: Layout,
    params: Vec<f64>,
    version: u64,
}

impl Network {
    /// He-uniform weights, zero biases.
    pub fn new(config: NetConfig, position: Position, seed: u64) -> Result<Network> {
        config.validate()?;
        if config.kind != position.kind() {
            return Err(ModelError::Config(format!("{:?} net for position {position}", config.kind)));
        }
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: usize, count: usize, fan_in: usize, gain: f64| {
            let bound = (gain * 3.0 / fan_in as f64).sqrt();
            for p in &mut params[w..w + count] {
                *p = rng.random_range(-bound..bound);
            }
        };
        for b in &layout.blocks {
            for c in std::iter::once(&b.conv1).chain([&b.conv2]).chain(&b.proj) {
                fill(c.w, c.cout * c.cin * c.k, c.fan_in(), 2.0);
            }
        }
        let last = layout.fcs.len() - 1;
        for (i, fc) in layout.fcs.iter().enumerate() {
            let gain = if i == last { 1.0 } else { 2.0 };
            fill(fc.w, fc.fan_in * fc.fan_out, fc.fan_in, gain);
        }
        Ok(Network { config, position, layout, params, version: 0 })
    }

    /// Rebuilds a network from stored parameters.
    pub fn from_parts(config: NetConfig, position: Position, params: Vec<f64>, version: u64) -> Result<Network> {
        let mut net = Network::new(config, position, 0)?;
        if params.len() != net.params.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} parameters for a net of {}",
                params.len(),
                net.params.len()
            )));
        }
        net.params = params;
        net.version = version;
        Ok(net)
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn position(&self) -> Position {
        self.position
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    fn check(&self, input: &Input) -> Result<()> {
        let cfg = &self.config;
        if input.n == 0 {
            return Err(ModelError::EmptyBatch);
        }
        if input.planes.len() != input.n * cfg.slice_len() {
            return Err(ModelError::ShapeMismatch(format!(
                "planes hold {} values, expected {} × {}",
                input.planes.len(),
                input.n,
                cfg.slice_len()
            )));
        }
        if input.extra.len() != input.n * cfg.part_b_width {
            return Err(ModelError::ShapeMismatch(format!(
                "extra holds {} values, expected {} × {}",
                input.extra.len(),
                input.n,
                cfg.part_b_width
            )));
        }
        Ok(())
    }

    fn run(&self, input: &Input, keep: bool) -> Result<Tape> {
        self.check(input)?;
        let cfg = &self.config;
        let (n, c0, w0) = (input.n, cfg.input_channels, cfg.input_width);
        let p = &self.params;

        // [n][C][L] f32 → [C][n][L] f64
        let mut x = vec![0.0; n * c0 * w0];
        for b in 0..n {
            for c in 0..c0 {
                let src = &input.planes[(b * c0 + c) * w0..][..w0];
                let dst = &mut x[(c * n + b) * w0..][..w0];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = f64::from(*s);
                }
            }
        }

        let mut acts = Vec::new();
        let mut mids = Vec::new();
        for blk in &self.layout.blocks {
            let mut a = blk.conv1.forward(p, &x, n, blk.lin);
            relu_in_place(&mut a);
            let mut y = blk.conv2.forward(p, &a, n, blk.lout());
            match &blk.proj {
                Some(pr) => {
                    let s = pr.forward(p, &x, n, blk.lin);
                    y.iter_mut().zip(&s).for_each(|(v, s)| *v += s);
                }
                None => y.iter_mut().zip(&x).for_each(|(v, s)| *v += s),
            }
            relu_in_place(&mut y);
            if keep {
                acts.push(std::mem::replace(&mut x, y));
                mids.push(a);
            } else {
                x = y;
            }
        }

        let last = self.layout.blocks.last().expect("at least one block");
        let (c, l) = (last.cout, last.lout());
        let flat = c * l;
        let width = cfg.head_input_width();
        let pb = cfg.part_b_width;
        let mut h = vec![0.0; n * width];
        for b in 0..n {
            let row = &mut h[b * width..][..width];
            for ci in 0..c {
                let src = &x[(ci * n + b) * l..][..l];
                row[ci * l..][..l].copy_from_slice(src);
            }
            let extra = &input.extra[b * pb..][..pb];
            for r in 0..cfg.part_b_repeat {
                for (d, s) in row[flat + r * pb..][..pb].iter_mut().zip(extra) {
                    *d = f64::from(*s);
                }
            }
        }
        if keep {
            acts.push(x);
        }

        let mut heads = Vec::new();
        let nfc = self.layout.fcs.len();
        for (i, fc) in self.layout.fcs.iter().enumerate() {
            let mut y = fc.forward(p, &h, n);
            if i + 1 < nfc {
                relu_in_place(&mut y);
            }
            if keep {
                heads.push(std::mem::replace(&mut h, y));
            } else {
                h = y;
            }
        }
        Ok(Tape { n, acts, mids, heads, out: h })
    }

    /// Raw `(p, Q_w, Q_l)` rows with `p` already squashed by tanh.
    pub fn forward_raw(&self, input: &Input) -> Result<Vec<[f64; 3]>> {
        let tape = self.run(input, false)?;
        Ok(tape.out.chunks_exact(OUTPUTS).map(|o| [o[0].tanh(), o[1], o[2]]).collect())
    }

    pub fn forward(&self, input: &Input) -> Result<Vec<PerActionEstimate>> {
        Ok(self
            .forward_raw(input)?
            .into_iter()
            .map(|[p, qw, ql]| PerActionEstimate::new(p, qw, ql))
            .collect())
    }

    /// Loss and its gradient with respect to every parameter.
    pub fn loss_and_grad(
        &self,
        input: &Input,
        targets: &[Target],
        weights: &LossWeights,
    ) -> Result<(LossReport, Vec<f64>)> {
        if targets.len() != input.n {
            return Err(ModelError::ShapeMismatch(format!(
                "{} targets for a batch of {}",
                targets.len(),
                input.n
            )));
        }
        let tape = self.run(input, true)?;
        let n = tape.n;
        let outputs: Vec<[f64; 3]> =
            tape.out.chunks_exact(OUTPUTS).map(|o| [o[0].tanh(), o[1], o[2]]).collect();
        let (report, douts) = loss_gradients(&outputs, targets, weights)?;

        let mut dy: Vec<f64> = Vec::with_capacity(n * OUTPUTS);
        for ([p, _, _], d) in outputs.iter().zip(&douts) {
            dy.extend_from_slice(&[d[0] * (1.0 - p * p), d[1], d[2]]);
        }
        let mut grads = vec![0.0; self.params.len()];
        self.backward(&tape, dy, &mut grads);
        Ok((report, grads))
    }

    fn backward(&self, tape: &Tape, mut dy: Vec<f64>, grads: &mut [f64]) {
        let p = &self.params;
        let n = tape.n;
        for (i, fc) in self.layout.fcs.iter().enumerate().rev() {
            let x = &tape.heads[i];
            let dx = fc.backward(p, grads, x, n, &dy, true).expect("dx requested");
            dy = dx;
            if i > 0 {
                relu_mask(&mut dy, x);
            }
        }

        let last = self.layout.blocks.last().expect("at least one block");
        let (c, l) = (last.cout, last.lout());
        let width = self.config.head_input_width();
        let mut dx = vec![0.0; c * n * l];
        for b in 0..n {
            let row = &dy[b * width..][..width];
            for ci in 0..c {
                dx[(ci * n + b) * l..][..l].copy_from_slice(&row[ci * l..][..l]);
            }
        }

        for (i, blk) in self.layout.blocks.iter().enumerate().rev() {
            let x = &tape.acts[i];
            let out = &tape.acts[i + 1];
            let mid = &tape.mids[i];
            let need_dx = i > 0;
            relu_mask(&mut dx, out);
            let mut dmid = blk
                .conv2
                .backward(p, grads, mid, n, blk.lout(), &dx, true)
                .expect("dx requested");
            relu_mask(&mut dmid, mid);
            let d1 = blk.conv1.backward(p, grads, x, n, blk.lin, &dmid, need_dx);
            let ds = match &blk.proj {
                Some(pr) => pr.backward(p, grads, x, n, blk.lin, &dx, need_dx),
                None => Some(dx),
            };
            if need_dx {
                let mut d = d1.expect("dx requested");
                d.iter_mut().zip(ds.expect("dx requested")).for_each(|(a, b)| *a += b);
                dx = d;
            } else {
                break;
            }
        }
    }

    /// One optimiser update on the batch. Bumps the version.
    pub fn train_step(
        &mut self,
        input: &Input,
        targets: &[Target],
        weights: &LossWeights,
        optimizer: &mut Optimizer,
    ) -> Result<LossReport> {
        let (report, grads) = self.loss_and_grad(input, targets, weights)?;
        if !report.is_finite() {
            return Err(ModelError::NonFiniteLoss {
                total: report.total,
                l_p: report.l_p,
                l_q: report.l_q,
                version: self.version,
            });
        }
        optimizer.step(&mut self.params, &grads)?;
        self.version += 1;
        Ok(report)
    }
}
