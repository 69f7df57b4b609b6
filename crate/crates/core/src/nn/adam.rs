use alloc::vec;
use alloc::vec::Vec;

use super::params::{Gradients, ParamStore};
use super::NnError;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected moments. Frozen parameter rows are never touched.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || store.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        AdamState { config, step: 0, m: zeros(), v: zeros() }
    }

    /// Applies one update. A non-finite gradient aborts the step before any
    /// state changes.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> Result<(), NnError> {
        for (id, p) in store.iter() {
            if grads.get(id).iter().any(|g| !g.is_finite()) {
                return Err(NnError::NonFiniteGradient(p.name.clone()));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as f64;
        let bc1 = 1.0 - math::powf(beta1, t);
        let bc2 = 1.0 - math::powf(beta2, t);
        let ids: Vec<_> = store.iter().map(|(id, _)| id).collect();
        for id in ids {
            let p = store.get_mut(id);
            let cols = p.cols.max(1);
            let g = grads.get(id);
            let (m, v) = (&mut self.m[id.0], &mut self.v[id.0]);
            for k in 0..p.value.len() {
                if p.is_row_frozen(k / cols) {
                    continue;
                }
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let m_hat = m[k] / bc1;
                let v_hat = v[k] / bc2;
                p.value[k] -= lr * m_hat / (math::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}
