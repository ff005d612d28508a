use alloc::format;

use crate::{Error, Result};

/// Architecture and optimisation settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct ModelConfig {
    /// Token width C.
    pub feature_dim: usize,
    /// Patches per cloud M.
    pub patch_count: usize,
    /// Points per patch k.
    pub patch_size: usize,
    pub n_blocks: usize,
    pub n_heads: usize,
    /// Feed-forward hidden width as a multiple of C.
    pub mlp_ratio: usize,
    /// Hidden width of the shared per-point MLP.
    pub embed_hidden: usize,
    pub mask_ratio: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Rotation/scale/jitter augmentation of training pairs.
    pub augment: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            feature_dim: 128,
            patch_count: 64,
            patch_size: 32,
            n_blocks: 4,
            n_heads: 4,
            mlp_ratio: 2,
            embed_hidden: 64,
            mask_ratio: 0.7,
            learning_rate: 1e-3,
            weight_decay: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 128,
            epochs: 300,
            augment: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feature_dim", self.feature_dim),
            ("patch_count", self.patch_count),
            ("patch_size", self.patch_size),
            ("n_heads", self.n_heads),
            ("mlp_ratio", self.mlp_ratio),
            ("embed_hidden", self.embed_hidden),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !self.feature_dim.is_multiple_of(self.n_heads) {
            return Err(Error::Config(format!(
                "feature_dim {} is not divisible by n_heads {}",
                self.feature_dim, self.n_heads
            )));
        }
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(Error::Config("mask_ratio must lie in [0, 1]".into()));
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0) {
            return Err(Error::Config("learning_rate and weight_decay must be >= 0".into()));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.adam_eps > 0.0) {
            return Err(Error::Config("invalid optimizer moments".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.feature_dim / self.n_heads
    }

    /// Number of masked query-target patches, `ceil(mask_ratio * M)`.
    pub fn mask_count(&self) -> usize {
        mask_count(self.mask_ratio, self.patch_count)
    }

    /// Points produced when every query-target patch is predicted.
    pub fn output_points(&self) -> usize {
        self.patch_count * self.patch_size
    }
}

pub(crate) fn mask_count(ratio: f64, m: usize) -> usize {
    // the epsilon absorbs representation error such as 0.7 * 10 = 7.000000000000001
    (libm::ceil(ratio * m as f64 - 1e-9) as usize).min(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_arithmetic() {
        assert_eq!(mask_count(0.7, 64), 45);
        assert_eq!(mask_count(0.0, 64), 0);
        assert_eq!(mask_count(1.0, 64), 64);
        assert_eq!(mask_count(0.7, 10), 7);
        assert_eq!(ModelConfig::default().mask_count(), 45);
    }

    #[test]
    fn validation() {
        ModelConfig::default().validate().unwrap();
        assert!(ModelConfig { n_heads: 3, ..Default::default() }.validate().is_err());
        assert!(ModelConfig { mask_ratio: 1.5, ..Default::default() }.validate().is_err());
    }
}
