//! Flat parameter storage with a fixed, documented tensor order.
//!
//! Order (row-major within each tensor):
//! `patch.w1 [3,H]`, `patch.b1 [H]`, `patch.w2 [H,C]`, `patch.b2 [C]`,
//! `pos.w1 [3,C]`, `pos.b1 [C]`, `pos.w2 [C,C]`, `pos.b2 [C]`, then per block
//! `ln1.gamma [C]`, `ln1.beta [C]`, `attn.wqkv [C,3C]`, `attn.bqkv [3C]`,
//! `attn.wo [C,C]`, `attn.bo [C]`, `ln2.gamma [C]`, `ln2.beta [C]`,
//! `mlp.w1 [C,rC]`, `mlp.b1 [rC]`, `mlp.w2 [rC,C]`, `mlp.b2 [C]`, then
//! `mask_token [C]`, `head.ln.gamma [C]`, `head.ln.beta [C]`, `head.w [C,3k]`,
//! `head.b [3k]`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::ModelConfig;
use crate::math::sqrt;
use crate::rng::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    pub range: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayout {
    pub w1: Range<usize>,
    pub b1: Range<usize>,
    pub w2: Range<usize>,
    pub b2: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub ln1_g: Range<usize>,
    pub ln1_b: Range<usize>,
    pub wqkv: Range<usize>,
    pub bqkv: Range<usize>,
    pub wo: Range<usize>,
    pub bo: Range<usize>,
    pub ln2_g: Range<usize>,
    pub ln2_b: Range<usize>,
    pub mlp: MlpLayout,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadLayout {
    pub ln_g: Range<usize>,
    pub ln_b: Range<usize>,
    pub w: Range<usize>,
    pub b: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub patch: MlpLayout,
    pub pos: MlpLayout,
    pub blocks: Vec<BlockLayout>,
    pub mask_token: Range<usize>,
    pub head: HeadLayout,
    pub tensors: Vec<TensorInfo>,
    pub total: usize,
}

struct Builder {
    tensors: Vec<TensorInfo>,
    next: usize,
}

impl Builder {
    fn add(&mut self, name: String, shape: &[usize]) -> Range<usize> {
        let len: usize = shape.iter().product();
        let range = self.next..self.next + len;
        self.next += len;
        self.tensors.push(TensorInfo { name, shape: shape.to_vec(), range: range.clone() });
        range
    }

    fn mlp(&mut self, prefix: &str, din: usize, hidden: usize, dout: usize) -> MlpLayout {
        MlpLayout {
            w1: self.add(format!("{prefix}.w1"), &[din, hidden]),
            b1: self.add(format!("{prefix}.b1"), &[hidden]),
            w2: self.add(format!("{prefix}.w2"), &[hidden, dout]),
            b2: self.add(format!("{prefix}.b2"), &[dout]),
        }
    }
}

impl Layout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let c = cfg.feature_dim;
        let mut b = Builder { tensors: Vec::new(), next: 0 };
        let patch = b.mlp("patch", 3, cfg.embed_hidden, c);
        let pos = b.mlp("pos", 3, c, c);
        let blocks = (0..cfg.n_blocks)
            .map(|i| BlockLayout {
                ln1_g: b.add(format!("block{i}.ln1.gamma"), &[c]),
                ln1_b: b.add(format!("block{i}.ln1.beta"), &[c]),
                wqkv: b.add(format!("block{i}.attn.wqkv"), &[c, 3 * c]),
                bqkv: b.add(format!("block{i}.attn.bqkv"), &[3 * c]),
                wo: b.add(format!("block{i}.attn.wo"), &[c, c]),
                bo: b.add(format!("block{i}.attn.bo"), &[c]),
                ln2_g: b.add(format!("block{i}.ln2.gamma"), &[c]),
                ln2_b: b.add(format!("block{i}.ln2.beta"), &[c]),
                mlp: b.mlp(&format!("block{i}.mlp"), c, cfg.mlp_ratio * c, c),
            })
            .collect();
        let mask_token = b.add("mask_token".into(), &[c]);
        let head = HeadLayout {
            ln_g: b.add("head.ln.gamma".into(), &[c]),
            ln_b: b.add("head.ln.beta".into(), &[c]),
            w: b.add("head.w".into(), &[c, 3 * cfg.patch_size]),
            b: b.add("head.b".into(), &[3 * cfg.patch_size]),
        };
        Layout { patch, pos, blocks, mask_token, head, total: b.next, tensors: b.tensors }
    }
}

/// All trainable weights of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    layout: Layout,
    values: Vec<f64>,
}

impl ModelParams {
    /// Xavier-uniform matrices, unit norm scales, zero biases and a small
    /// Gaussian mask token.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        let mut values = vec![0.0; layout.total];
        let mut r = rng(config.seed);
        let normal = Normal::new(0.0, 0.02).map_err(|e| Error::invalid(format!("{e}")))?;
        for t in &layout.tensors {
            let slot = &mut values[t.range.clone()];
            if t.name.ends_with("gamma") {
                slot.fill(1.0);
            } else if t.name == "mask_token" {
                for v in slot.iter_mut() {
                    *v = normal.sample(&mut r);
                }
            } else if t.shape.len() == 2 {
                let bound = sqrt(6.0 / (t.shape[0] + t.shape[1]) as f64);
                for v in slot.iter_mut() {
                    *v = r.random_range(-bound..bound);
                }
            }
        }
        Ok(ModelParams { config: config.clone(), layout, values })
    }

    pub fn from_values(config: &ModelConfig, values: Vec<f64>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        if values.len() != layout.total {
            return Err(Error::shape(format!("expected {} parameters, got {}", layout.total, values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter vector".into()));
        }
        Ok(ModelParams { config: config.clone(), layout, values })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, r: &Range<usize>) -> &[f64] {
        &self.values[r.clone()]
    }

    /// Rounds every weight to single precision, the checkpoint storage type.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }

    /// Replaces the optimisation settings, keeping the architecture.
    pub fn with_training_config(mut self, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        if Layout::new(config) != self.layout {
            return Err(Error::Config("architecture differs from the checkpoint".into()));
        }
        self.config = config.clone();
        Ok(self)
    }

    /// SHA-256 over the architecture and the single-precision weights.
    pub fn fingerprint(&self) -> [u8; 32] {
        let c = &self.config;
        let mut h = Sha256::new();
        h.update(b"dgpic-params/1");
        for v in [c.feature_dim, c.patch_count, c.patch_size, c.n_blocks, c.n_heads, c.mlp_ratio, c.embed_hidden] {
            h.update((v as u64).to_le_bytes());
        }
        for &v in &self.values {
            h.update((v as f32).to_le_bytes());
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(&h.finalize());
        out
    }
}
