//! `DGPM` model checkpoints.
//!
//! Layout (little-endian): magic `DGPM`, version `u32`, the architecture as
//! seven `u32` (feature_dim, patch_count, patch_size, n_blocks, n_heads,
//! mlp_ratio, embed_hidden), mask_ratio, learning_rate, weight_decay, beta1,
//! beta2, adam_eps as `f64`, batch_size and epochs as `u32`, augment as `u8`,
//! seed as `u64`, the parameter count as `u64`, the parameters as `f32` in the
//! order documented on [`dgpic_core::model::ModelParams`], then a CRC32 of all
//! preceding bytes.

use std::path::Path;

use dgpic_core::model::{ModelConfig, ModelParams};

use crate::binio::{read_file, write_file, Reader, Writer};
use crate::error::Result;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DGPM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let c = params.config();
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    for v in [c.feature_dim, c.patch_count, c.patch_size, c.n_blocks, c.n_heads, c.mlp_ratio, c.embed_hidden] {
        w.u32(v as u32);
    }
    for v in [c.mask_ratio, c.learning_rate, c.weight_decay, c.beta1, c.beta2, c.adam_eps] {
        w.f64(v);
    }
    w.u32(c.batch_size as u32);
    w.u32(c.epochs as u32);
    w.u8(c.augment as u8);
    w.u64(c.seed);
    w.u64(params.len() as u64);
    w.f32s(params.values());
    w.finish()
}

pub fn decode_checkpoint(raw: &[u8], path: &Path) -> Result<ModelParams> {
    let mut r = Reader::open(raw, path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let mut dims = [0usize; 7];
    for d in &mut dims {
        *d = r.len_u32()?;
    }
    let mut reals = [0f64; 6];
    for v in &mut reals {
        *v = r.f64()?;
    }
    let config = ModelConfig {
        feature_dim: dims[0],
        patch_count: dims[1],
        patch_size: dims[2],
        n_blocks: dims[3],
        n_heads: dims[4],
        mlp_ratio: dims[5],
        embed_hidden: dims[6],
        mask_ratio: reals[0],
        learning_rate: reals[1],
        weight_decay: reals[2],
        beta1: reals[3],
        beta2: reals[4],
        adam_eps: reals[5],
        batch_size: r.len_u32()?,
        epochs: r.len_u32()?,
        augment: match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(r.err(format!("invalid augment flag {b}"))),
        },
        seed: r.u64()?,
    };
    let count = usize::try_from(r.u64()?).map_err(|_| r.err("parameter count overflows"))?;
    let values = r.f32s(count)?;
    r.end()?;
    Ok(ModelParams::from_values(&config, values)?)
}

/// Writes a checkpoint. Values are stored in single precision.
pub fn save_checkpoint(params: &ModelParams, path: &Path) -> Result<()> {
    write_file(path, &encode_checkpoint(params))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    decode_checkpoint(&read_file(path, "checkpoint")?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::DgpicError;

    fn tiny() -> ModelParams {
        let cfg = ModelConfig { feature_dim: 8, patch_count: 4, patch_size: 4, n_blocks: 1, n_heads: 2, embed_hidden: 8, seed: 3, ..Default::default() };
        ModelParams::init(&cfg).unwrap()
    }

    #[test]
    fn round_trip_keeps_single_precision_values() {
        let mut p = tiny();
        let bytes = encode_checkpoint(&p);
        let back = decode_checkpoint(&bytes, Path::new("m.dgpm")).unwrap();
        p.round_to_f32();
        assert_eq!(back, p);
        assert_eq!(back.fingerprint(), p.fingerprint());
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn flipped_byte_is_corruption() {
        let mut bytes = encode_checkpoint(&tiny());
        bytes[40] ^= 1;
        assert!(matches!(decode_checkpoint(&bytes, Path::new("m")), Err(DgpicError::Corrupt { .. })));
    }

    #[test]
    fn wrong_magic_and_version() {
        let good = encode_checkpoint(&tiny());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad, Path::new("m")), Err(DgpicError::Format { .. })));
        let mut w = crate::binio::Writer::default();
        w.bytes(&good[..4]);
        w.u32(7);
        w.bytes(&good[8..good.len() - 4]);
        let bytes = w.finish();
        assert!(matches!(decode_checkpoint(&bytes, Path::new("m")), Err(DgpicError::Version { .. })));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let good = encode_checkpoint(&tiny());
        let mut w = crate::binio::Writer::default();
        w.bytes(&good[..good.len() - 12]);
        assert!(matches!(decode_checkpoint(&w.finish(), Path::new("m")), Err(DgpicError::Format { .. })));
    }
}
