//! Test-time domain generalization: source prototypes, distance-weighted
//! feature shifting, prompt selection and shifted in-context inference.

mod coefficients;
mod infer;
mod prototypes;
mod shift;

pub use coefficients::{
    distance_profile, macro_coefficients, micro_coefficients, select_source_domain, DistanceProfile, ShiftCoefficients,
};
pub use infer::{infer, select_prompt, shifted_query_tokens, FrozenModel, Inference, InferenceContext, InferenceSettings};
pub use prototypes::{
    estimate_prototypes, prototypes_from_features, sample_features, DomainPrototype, PromptBank, PromptEntry,
    PrototypeGrouping, PrototypeSet, SampleFeatures,
};
pub use shift::{apply_shift, shift_features, shift_weights, ShiftMode, ShiftWeights};
