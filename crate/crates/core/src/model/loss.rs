//! Node and edge loss terms.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// Minimiser of `KL(q || p) - E_q[sim]` over the simplex:
/// `q(v) ∝ p(v) exp(sim(v))`.
pub fn compute_q(p: &[f64], sim_row: &[f64]) -> Vec<f64> {
    assert_eq!(p.len(), sim_row.len());
    let logits: Vec<f64> =
        p.iter().zip(sim_row).map(|(&pv, &s)| if pv > 0.0 { math::ln(pv) + s } else { f64::NEG_INFINITY }).collect();
    math::softmax(&logits)
}

/// `H(target, pred)` for probability vectors.
pub fn cross_entropy(target: &[f64], pred: &[f64]) -> f64 {
    target.iter().zip(pred).filter(|(&t, _)| t > 0.0).map(|(&t, &p)| -t * math::ln(p)).sum()
}

/// `(1 - alpha) H(p_true, p_hat) + alpha H(p_true, q)`.
pub fn node_loss(p_true: &[f64], p_hat: &[f64], q: &[f64], alpha: f64) -> f64 {
    (1.0 - alpha) * cross_entropy(p_true, p_hat) + alpha * cross_entropy(p_true, q)
}

/// Class-balanced weight `(1 - beta) / (1 - beta^n)` for a class seen `n`
/// times. Uses `expm1`/`ln1p` so that `beta` close to 1 keeps full precision.
pub fn class_balance_weight(n: u64, beta: f64) -> f64 {
    assert!(n >= 1, "class counts are floored at 1");
    assert!(beta > 0.0 && beta < 1.0, "beta must lie in (0, 1)");
    if n == 1 {
        return 1.0;
    }
    let one_minus_beta = 1.0 - beta;
    // 1 - beta^n = -expm1(n ln beta)
    let denom = -libm::expm1(n as f64 * libm::log1p(-one_minus_beta));
    one_minus_beta / denom
}

pub fn edge_loss(p_true: &[f64], p_hat: &[f64], n: u64, beta: f64) -> f64 {
    class_balance_weight(n, beta) * cross_entropy(p_true, p_hat)
}

/// Per-class relation counts over a training set, `NO_EDGE` last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeClassStats {
    pub counts: Vec<u64>,
}

impl EdgeClassStats {
    pub fn new(num_classes: usize) -> Self {
        EdgeClassStats { counts: vec![0; num_classes] }
    }

    pub fn record(&mut self, class: usize) {
        self.counts[class] += 1;
    }

    /// Count used for weighting; unseen classes count as 1.
    pub fn count(&self, class: usize) -> u64 {
        self.counts[class].max(1)
    }
}

/// How edge cross-entropy terms are weighted.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeWeighting {
    /// Every class weighs 1.
    Uniform,
    ClassBalanced {
        stats: EdgeClassStats,
        beta: f64,
    },
}

impl EdgeWeighting {
    pub fn weights(&self, num_classes: usize) -> Vec<f64> {
        match self {
            EdgeWeighting::Uniform => vec![1.0; num_classes],
            EdgeWeighting::ClassBalanced { stats, beta } => {
                (0..num_classes).map(|c| class_balance_weight(stats.count(c), *beta)).collect()
            }
        }
    }
}
