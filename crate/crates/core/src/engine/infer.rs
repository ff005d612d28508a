use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::coefficients::{blend, distance_profile, mean_patch_distance, select_source_domain, ShiftCoefficients};
use super::prototypes::{sample_features, PromptBank, PrototypeSet, SampleFeatures};
use super::shift::{shift_weights, apply_shift, ShiftMode};
use crate::data::{SamplePair, TaskKind};
use crate::geometry::PointCloud;
use crate::math::l2_distance;
use crate::model::{embed_patches, patchify_pair, predict_from_tokens, ModelParams};
use crate::{Error, Result};

/// Sample id of the bank entry closest to the given features under the
/// blended global/local distance; ties go to the smallest id.
pub fn select_prompt(features: &SampleFeatures, bank: &PromptBank, domain: usize, task: TaskKind, lambda: f64) -> Result<u64> {
    let c = features.global.len();
    let mut best: Option<(f64, u64)> = None;
    for e in bank.candidates(domain, task) {
        if e.features.global.len() != c || e.features.local.len() != features.local.len() {
            return Err(Error::contract("prompt bank features differ in shape from the query"));
        }
        let d = blend(
            lambda,
            l2_distance(&features.global, &e.features.global),
            mean_patch_distance(&features.local, &e.features.local, c),
        );
        let better = match best {
            None => true,
            Some((bd, bid)) => d < bd || (d == bd && e.sample_id < bid),
        };
        if better {
            best = Some((d, e.sample_id));
        }
    }
    best.map(|(_, id)| id)
        .ok_or_else(|| Error::contract(format!("prompt bank has no entries for domain {domain} and task {}", task.as_str())))
}

/// Parameters that are only ever read, with the fingerprint they had when frozen.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    params: ModelParams,
    hash: [u8; 32],
}

impl FrozenModel {
    pub fn new(params: ModelParams) -> Self {
        let hash = params.fingerprint();
        FrozenModel { params, hash }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn hash(&self) -> [u8; 32] {
        self.hash
    }

    /// Recomputes the fingerprint of the current weights.
    pub fn current_hash(&self) -> [u8; 32] {
        self.params.fingerprint()
    }
}

/// Settings shared by every inference call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceSettings {
    pub lambda: f64,
    pub negate_distances: bool,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        InferenceSettings { lambda: 0.5, negate_distances: false }
    }
}

/// Read-only state for shifted in-context inference.
pub struct InferenceContext<'a> {
    pub model: &'a FrozenModel,
    pub prototypes: &'a PrototypeSet,
    pub bank: &'a PromptBank,
    prompts: BTreeMap<u64, &'a SamplePair>,
    pub settings: InferenceSettings,
}

impl<'a> InferenceContext<'a> {
    /// `prompt_pairs` must contain every sample referenced by the bank.
    pub fn new(
        model: &'a FrozenModel,
        prototypes: &'a PrototypeSet,
        bank: &'a PromptBank,
        prompt_pairs: impl IntoIterator<Item = &'a SamplePair>,
        settings: InferenceSettings,
    ) -> Result<Self> {
        prototypes.check_hash(&model.hash())?;
        let cfg = model.params().config();
        if prototypes.feature_dim != cfg.feature_dim || prototypes.patch_count != cfg.patch_count {
            return Err(Error::Stale("prototype shape does not match the checkpoint".into()));
        }
        if !(0.0..=1.0).contains(&settings.lambda) {
            return Err(Error::invalid("lambda outside [0, 1]"));
        }
        let prompts: BTreeMap<u64, &SamplePair> = prompt_pairs.into_iter().map(|p| (p.sample_id, p)).collect();
        if let Some(e) = bank.entries.iter().find(|e| !prompts.contains_key(&e.sample_id)) {
            return Err(Error::contract(format!("prompt sample {} is not available", e.sample_id)));
        }
        Ok(InferenceContext { model, prototypes, bank, prompts, settings })
    }
}

/// Prediction plus the decisions that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub prediction: PointCloud,
    pub source_domain: usize,
    pub prompt_id: u64,
    /// Per-patch coefficient mass of the shift.
    pub mass: Vec<f64>,
}

/// Shifts the query tokens towards the source prototypes, picks a prompt from
/// the closest source domain and predicts the full query target.
pub fn infer(input: &PointCloud, task: TaskKind, ctx: &InferenceContext<'_>, mode: ShiftMode, seed: u64) -> Result<Inference> {
    let params = ctx.model.params();
    let c = params.config().feature_dim;
    let (mut tokens, features) = sample_features(input, params)?;
    let protos = ctx.prototypes.for_task(task)?;
    let profile = distance_profile(&features.global, &features.local, &protos)?;
    let coeffs = ShiftCoefficients::from_profile(&profile, ctx.settings.lambda, ctx.settings.negate_distances)?;
    let weights = shift_weights(&profile, &coeffs, mode, seed)?;
    if mode != ShiftMode::None {
        tokens.tokens = apply_shift(&features.local, &protos, &weights, c)?;
    }
    let domain = select_source_domain(&profile, ctx.settings.lambda)?;
    let prompt_id = select_prompt(&features, ctx.bank, domain, task, ctx.settings.lambda)?;
    let prompt = ctx.prompts.get(&prompt_id).ok_or_else(|| Error::contract(format!("prompt sample {prompt_id} missing")))?;
    let cfg = params.config();
    let pair = patchify_pair(&prompt.input, &prompt.target, cfg.patch_count, cfg.patch_size)?;
    let p_in = embed_patches(&pair.input, params)?;
    let p_tgt = embed_patches(&pair.target, params)?;
    let points = predict_from_tokens(&tokens, &p_in, &p_tgt, params)?;
    Ok(Inference { prediction: PointCloud::new(points)?, source_domain: domain, prompt_id, mass: weights.mass() })
}

/// The query-input tokens that `infer` feeds to the transformer.
pub fn shifted_query_tokens(input: &PointCloud, task: TaskKind, ctx: &InferenceContext<'_>, mode: ShiftMode, seed: u64) -> Result<Vec<f64>> {
    let params = ctx.model.params();
    let (_, features) = sample_features(input, params)?;
    let protos = ctx.prototypes.for_task(task)?;
    let profile = distance_profile(&features.global, &features.local, &protos)?;
    let coeffs = ShiftCoefficients::from_profile(&profile, ctx.settings.lambda, ctx.settings.negate_distances)?;
    super::shift::shift_features(&features.local, &protos, &profile, &coeffs, mode, seed)
}
