use alloc::vec;
use alloc::vec::Vec;

use super::{ModelConfig, ModelParams};
use crate::math::{cos, sqrt};
use crate::{Error, Result};

/// Cosine decay from `base` to zero over `total` steps, no warm-up.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    let t = (step.min(total)) as f64 / total as f64;
    0.5 * base * (1.0 + cos(core::f64::consts::PI * t))
}

/// Adam with decoupled weight decay applied to matrix-shaped tensors only.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: Vec<f64>,
    v: Vec<f64>,
    decay: Vec<bool>,
    step: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
}

impl AdamW {
    pub fn new(params: &ModelParams, cfg: &ModelConfig) -> Self {
        let mut decay = vec![false; params.len()];
        for t in &params.layout().tensors {
            if t.shape.len() == 2 {
                decay[t.range.clone()].fill(true);
            }
        }
        AdamW {
            m: vec![0.0; params.len()],
            v: vec![0.0; params.len()],
            decay,
            step: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            weight_decay: cfg.weight_decay,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &[f64], lr: f64) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::shape("gradient length differs from parameter count"));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(alloc::format!("gradient entry {i}")));
        }
        self.step += 1;
        let bc1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        let values = params.values_mut();
        for i in 0..values.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            let mut delta = mhat / (sqrt(vhat) + self.eps);
            if self.decay[i] {
                delta += self.weight_decay * values[i];
            }
            values[i] -= lr * delta;
        }
        Ok(())
    }
}
