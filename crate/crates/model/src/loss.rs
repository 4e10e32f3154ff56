//! Factorised regression loss.
//!
//! With `D_w` the samples of won games and `D_l` the lost ones,
//!
//! ```text
//! L_p = mean over D of (p − u)²
//! L_q = (|D_w|/|D|)·mean over D_w of (Q_w − R)² + (|D_l|/|D|)·mean over D_l of (Q_l − R)²
//! L   = α1·L_p + α2·L_q
//! ```
//!
//! so `Q_w` only ever sees returns from wins and `Q_l` only from losses.

use ddz_core::PerActionEstimate;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { alpha1: 1.0, alpha2: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.alpha1.is_finite() && self.alpha2.is_finite() && self.alpha1 > 0.0 && self.alpha2 > 0.0 {
            Ok(())
        } else {
            Err(ModelError::Config(format!("loss weights must be finite and positive, got {self:?}")))
        }
    }
}

/// Training target for one sample: outcome sign and return.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub u: i8,
    pub r: f64,
}

impl Target {
    pub fn won(&self) -> bool {
        self.u > 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub l_p: f64,
    pub l_q: f64,
    pub wins: usize,
    pub losses: usize,
}

impl LossReport {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.l_p.is_finite() && self.l_q.is_finite()
    }
}

/// Loss of `(p, Q_w, Q_l)` rows plus its gradient with respect to each of them.
pub(crate) fn loss_gradients(
    outputs: &[[f64; 3]],
    targets: &[Target],
    weights: &LossWeights,
) -> Result<(LossReport, Vec<[f64; 3]>)> {
    if outputs.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let n = outputs.len() as f64;
    let mut sp = 0.0;
    let mut sq = 0.0;
    let mut wins = 0;
    let mut grads = Vec::with_capacity(outputs.len());
    for ([p, qw, ql], t) in outputs.iter().zip(targets) {
        let u = f64::from(t.u);
        sp += (p - u) * (p - u);
        let mut g = [weights.alpha1 * 2.0 * (p - u) / n, 0.0, 0.0];
        if t.won() {
            wins += 1;
            sq += (qw - t.r) * (qw - t.r);
            g[1] = weights.alpha2 * 2.0 * (qw - t.r) / n;
        } else {
            sq += (ql - t.r) * (ql - t.r);
            g[2] = weights.alpha2 * 2.0 * (ql - t.r) / n;
        }
        grads.push(g);
    }
    let l_p = sp / n;
    let l_q = sq / n;
    let report = LossReport {
        total: weights.alpha1 * l_p + weights.alpha2 * l_q,
        l_p,
        l_q,
        wins,
        losses: outputs.len() - wins,
    };
    Ok((report, grads))
}

/// The loss of a batch of estimates against their targets.
pub fn loss(estimates: &[PerActionEstimate], targets: &[Target], weights: &LossWeights) -> Result<LossReport> {
    if estimates.len() != targets.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} estimates for {} targets",
            estimates.len(),
            targets.len()
        )));
    }
    let rows: Vec<[f64; 3]> = estimates.iter().map(|e| [e.p, e.q_w, e.q_l]).collect();
    Ok(loss_gradients(&rows, targets, weights)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit_is_zero() {
        let r = loss(&[PerActionEstimate::new(1.0, 0.75, -9.0)], &[Target { u: 1, r: 0.75 }], &LossWeights::default())
            .unwrap();
        assert_eq!(r.total, 0.0);
    }

    #[test]
    fn all_losers_have_no_winner_term() {
        let est = [PerActionEstimate::new(0.0, 100.0, -1.0), PerActionEstimate::new(0.5, -50.0, -2.0)];
        let t = [Target { u: -1, r: -1.5 }, Target { u: -1, r: -1.5 }];
        let r = loss(&est, &t, &LossWeights::default()).unwrap();
        assert_eq!(r.wins, 0);
        assert!((r.l_q - (0.25 + 0.25) / 2.0).abs() < 1e-15);
        assert!((r.l_p - (1.0 + 2.25) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(loss(&[], &[], &LossWeights::default()), Err(ModelError::EmptyBatch)));
        assert!(LossWeights { alpha1: 0.0, alpha2: 1.0 }.validate().is_err());
    }
}
