use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, ParameterStore};
use crate::error::{Error, Result};

/// `lr · decay^⌊epoch / every⌋`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub base: f64,
    pub decay: f64,
    pub every: usize,
}

impl LrSchedule {
    pub fn constant(base: f64) -> Self {
        LrSchedule { base, decay: 1.0, every: 1 }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        self.base * libm::pow(self.decay, (epoch / self.every.max(1)) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base >= 0.0) || !(self.decay > 0.0 && self.decay <= 1.0) || self.every == 0 {
            return Err(Error::Config(alloc::format!(
                "bad learning-rate schedule: base {} decay {} every {}",
                self.base,
                self.decay,
                self.every
            )));
        }
        Ok(())
    }
}

/// Rescales `grads` so their global L2 norm is at most `max_norm`.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.l2_norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

fn zeros_like(store: &ParameterStore) -> Vec<Vec<f64>> {
    store.iter().map(|(_, _, v)| alloc::vec![0.0; v.len()]).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(store: &ParameterStore, config: AdamConfig) -> Self {
        Adam { config, m: zeros_like(store), v: zeros_like(store), t: 0 }
    }

    pub fn step(&mut self, store: &mut ParameterStore, grads: &Gradients, lr: f64) {
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - libm::pow(beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(beta2, self.t as f64);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let g = grads.get(id).data();
            let (m, v) = (&mut self.m[id.index()], &mut self.v[id.index()]);
            for ((p, gi), (mi, vi)) in store.values_mut(id).iter_mut().zip(g).zip(m.iter_mut().zip(v.iter_mut())) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                *p -= lr * (*mi / c1) / (libm::sqrt(*vi / c2) + eps);
            }
        }
    }
}

/// Heavy-ball SGD: `u ← μ·u + g`, `θ ← θ − lr·u`.
#[derive(Clone, Debug)]
pub struct Momentum {
    pub mu: f64,
    velocity: Vec<Vec<f64>>,
}

impl Momentum {
    pub fn new(store: &ParameterStore, mu: f64) -> Self {
        Momentum { mu, velocity: zeros_like(store) }
    }

    pub fn step(&mut self, store: &mut ParameterStore, grads: &Gradients, lr: f64) {
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let g = grads.get(id).data();
            let u = &mut self.velocity[id.index()];
            for ((p, gi), ui) in store.values_mut(id).iter_mut().zip(g).zip(u.iter_mut()) {
                *ui = self.mu * *ui + gi;
                *p -= lr * *ui;
            }
        }
    }
}
