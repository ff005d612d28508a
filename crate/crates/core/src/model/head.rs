//! Reconstruction head: layer norm followed by a linear map from a token to
//! `k` point offsets around the patch centre.

use alloc::format;
use alloc::vec::Vec;

use super::layers::{layer_norm, layer_norm_backward, linear, linear_backward, LayerNormCache};
use super::tokens::TokenMatrix;
use super::ModelParams;
use crate::geometry::Point3;
use crate::{Error, Result};

pub(crate) struct HeadCache {
    xhat: Vec<f64>,
    ln: LayerNormCache,
    rows: usize,
}

/// `x` holds `rows` tokens; returns `rows * k` points.
pub(crate) fn head_forward(x: &[f64], centers: &[Point3], params: &ModelParams) -> (Vec<Point3>, HeadCache) {
    let c = params.config().feature_dim;
    let k = params.config().patch_size;
    let l = &params.layout().head;
    let rows = centers.len();
    let (xhat, ln) = layer_norm(x, c, params.get(&l.ln_g), params.get(&l.ln_b));
    let y = linear(&xhat, rows, c, params.get(&l.w), params.get(&l.b));
    let pts = y
        .chunks_exact(3)
        .enumerate()
        .map(|(i, o)| {
            let ctr = centers[i / k];
            [ctr[0] + o[0], ctr[1] + o[1], ctr[2] + o[2]]
        })
        .collect();
    (pts, HeadCache { xhat, ln, rows })
}

/// Gradient w.r.t. the head input given gradients w.r.t. the predicted points.
pub(crate) fn head_backward(dpts: &[Point3], cache: &HeadCache, params: &ModelParams, grads: &mut [f64]) -> Vec<f64> {
    let c = params.config().feature_dim;
    let l = &params.layout().head;
    let dy: Vec<f64> = dpts.iter().flatten().copied().collect();
    let dxhat = linear_backward(&cache.xhat, cache.rows, c, params.get(&l.w), &dy, grads, &l.w, &l.b, true)
        .unwrap_or_default();
    layer_norm_backward(&dxhat, c, params.get(&l.ln_g), &cache.ln, grads, &l.ln_g, &l.ln_b)
}

/// Predicted points for the given query-target patches, `k` per patch.
pub fn reconstruct_patches(seq_out: &TokenMatrix, indices: &[usize], params: &ModelParams) -> Result<Vec<Vec<Point3>>> {
    let m = seq_out.len() / 4;
    let c = seq_out.dim;
    if seq_out.len() != 4 * m || c != params.config().feature_dim {
        return Err(Error::shape("reconstruction expects a four-segment sequence of model width"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= m) {
        return Err(Error::contract(format!("index {bad} outside the query-target segment of {m} patches")));
    }
    let mut x = Vec::with_capacity(indices.len() * c);
    let mut centers = Vec::with_capacity(indices.len());
    for &i in indices {
        x.extend_from_slice(seq_out.token(m + i));
        centers.push(seq_out.centers[m + i]);
    }
    let (pts, _) = head_forward(&x, &centers, params);
    let k = params.config().patch_size;
    Ok(pts.chunks_exact(k).map(|p| p.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use alloc::vec;

    #[test]
    fn zero_head_collapses_to_centres() {
        let cfg = ModelConfig { feature_dim: 4, patch_size: 5, n_blocks: 0, n_heads: 1, ..Default::default() };
        let mut params = ModelParams::init(&cfg).unwrap();
        let l = params.layout().head.clone();
        params.values_mut()[l.w].fill(0.0);
        params.values_mut()[l.b].fill(0.0);
        let m = 3;
        let seq = TokenMatrix {
            dim: 4,
            tokens: (0..16 * m).map(|i| i as f64 * 0.1).collect(),
            pos: vec![0.0; 16 * m],
            centers: (0..4 * m).map(|i| [i as f64, -(i as f64), 0.5]).collect(),
            segments: vec![None; 4 * m],
        };
        let out = reconstruct_patches(&seq, &[0, 2], &params).unwrap();
        assert_eq!(out.len(), 2);
        for (patch, idx) in out.iter().zip([0, 2]) {
            assert_eq!(patch.len(), 5);
            assert!(patch.iter().all(|&p| p == seq.centers[m + idx]));
        }
        assert!(matches!(reconstruct_patches(&seq, &[3], &params), Err(Error::Contract(_))));
    }
}
