//! Masked point modelling: patch tokenizer, transformer, reconstruction head
//! and the training loop.

mod config;
mod encoder;
mod gradcheck;
mod head;
mod layers;
mod optim;
mod params;
mod pass;
mod tokens;
mod train;
mod transformer;

pub use config::ModelConfig;
pub use encoder::embed_patches;
pub use gradcheck::{batch_gradient, batch_loss, gradient_check, GradCheckReport, GRADIENT_FLOOR};
pub use head::reconstruct_patches;
pub use optim::{cosine_lr, AdamW};
pub use params::{BlockLayout, HeadLayout, Layout, MlpLayout, ModelParams, TensorInfo};
pub use pass::{loss, patchify, patchify_pair, predict_from_tokens, Example, PatchedPair};
pub use tokens::{apply_mask, assemble_icl_sequence, draw_mask, global_feature, mask_tokens, Segment, TokenMatrix};
pub use train::{train, train_with_progress, Executor, GradientJob, Sequential, TrainOutcome};
pub use transformer::transformer_forward;
