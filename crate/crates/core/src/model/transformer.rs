//! Pre-norm transformer with full self-attention over the whole sequence.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layers::{gelu_backward, gelu_forward, layer_norm, layer_norm_backward, linear, linear_backward, LayerNormCache};
use super::params::BlockLayout;
use super::tokens::TokenMatrix;
use super::ModelParams;
use crate::math::{exp, gemm_strided, sqrt};
use crate::{Error, Result};

pub(crate) struct BlockCache {
    ln1: LayerNormCache,
    a: Vec<f64>,
    qkv: Vec<f64>,
    /// Attention probabilities, `heads x n x n`.
    probs: Vec<f64>,
    attn: Vec<f64>,
    ln2: LayerNormCache,
    b: Vec<f64>,
    h: Vec<f64>,
    th: Vec<f64>,
    g: Vec<f64>,
}

/// Runs every block over `x` (`n x C`, row-major) in place.
pub(crate) fn forward(x: &mut [f64], n: usize, params: &ModelParams, keep: bool) -> Result<Vec<BlockCache>> {
    let mut caches = Vec::new();
    for (i, block) in params.layout().blocks.iter().enumerate() {
        let cache = block_forward(x, n, params, block);
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric { block: i, detail: format!("activation {pos} is {}", x[pos]) });
        }
        if keep {
            caches.push(cache);
        }
    }
    Ok(caches)
}

fn block_forward(x: &mut [f64], n: usize, params: &ModelParams, l: &BlockLayout) -> BlockCache {
    let cfg = params.config();
    let (c, heads, dh) = (cfg.feature_dim, cfg.n_heads, cfg.head_dim());
    let (a, ln1) = layer_norm(x, c, params.get(&l.ln1_g), params.get(&l.ln1_b));
    let qkv = linear(&a, n, c, params.get(&l.wqkv), params.get(&l.bqkv));
    let scale = 1.0 / sqrt(dh as f64);
    let stride = 3 * c as isize;
    let mut probs = vec![0.0; heads * n * n];
    let mut attn = vec![0.0; n * c];
    for h in 0..heads {
        let p = &mut probs[h * n * n..(h + 1) * n * n];
        // scores = Q K^T / sqrt(dh)
        gemm_strided(n, dh, n, scale, &qkv[h * dh..], stride, 1, &qkv[c + h * dh..], 1, stride, 0.0, p, n as isize, 1);
        for row in p.chunks_exact_mut(n) {
            softmax_in_place(row);
        }
        gemm_strided(n, n, dh, 1.0, p, n as isize, 1, &qkv[2 * c + h * dh..], stride, 1, 0.0, &mut attn[h * dh..], c as isize, 1);
    }
    let o = linear(&attn, n, c, params.get(&l.wo), params.get(&l.bo));
    for (xv, ov) in x.iter_mut().zip(&o) {
        *xv += ov;
    }
    let (b, ln2) = layer_norm(x, c, params.get(&l.ln2_g), params.get(&l.ln2_b));
    let hidden = l.mlp.b1.len();
    let h = linear(&b, n, c, params.get(&l.mlp.w1), params.get(&l.mlp.b1));
    let (g, th) = gelu_forward(&h);
    let y = linear(&g, n, hidden, params.get(&l.mlp.w2), params.get(&l.mlp.b2));
    for (xv, yv) in x.iter_mut().zip(&y) {
        *xv += yv;
    }
    BlockCache { ln1, a, qkv, probs, attn, ln2, b, h, th, g }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = exp(*v - max);
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Back-propagates `dx` (gradient w.r.t. the final output) to the sequence
/// input, accumulating parameter gradients.
pub(crate) fn backward(dx: &mut Vec<f64>, n: usize, params: &ModelParams, caches: &[BlockCache], grads: &mut [f64]) {
    for (l, cache) in params.layout().blocks.iter().zip(caches).rev() {
        *dx = block_backward(dx, n, params, l, cache, grads);
    }
}

fn block_backward(dout: &[f64], n: usize, params: &ModelParams, l: &BlockLayout, cc: &BlockCache, grads: &mut [f64]) -> Vec<f64> {
    let cfg = params.config();
    let (c, heads, dh) = (cfg.feature_dim, cfg.n_heads, cfg.head_dim());
    let hidden = l.mlp.b1.len();

    // feed-forward branch
    let dg = linear_backward(&cc.g, n, hidden, params.get(&l.mlp.w2), dout, grads, &l.mlp.w2, &l.mlp.b2, true)
        .unwrap_or_default();
    let dh_ = gelu_backward(&dg, &cc.h, &cc.th);
    let db = linear_backward(&cc.b, n, c, params.get(&l.mlp.w1), &dh_, grads, &l.mlp.w1, &l.mlp.b1, true)
        .unwrap_or_default();
    let dmid = layer_norm_backward(&db, c, params.get(&l.ln2_g), &cc.ln2, grads, &l.ln2_g, &l.ln2_b);
    let mut dx1: Vec<f64> = dout.iter().zip(&dmid).map(|(a, b)| a + b).collect();

    // attention branch
    let dattn = linear_backward(&cc.attn, n, c, params.get(&l.wo), &dx1, grads, &l.wo, &l.bo, true)
        .unwrap_or_default();
    let scale = 1.0 / sqrt(dh as f64);
    let stride = 3 * c as isize;
    let mut dqkv = vec![0.0; n * 3 * c];
    let mut dp = vec![0.0; n * n];
    for h in 0..heads {
        let p = &cc.probs[h * n * n..(h + 1) * n * n];
        // dV = P^T dO
        gemm_strided(n, n, dh, 1.0, p, 1, n as isize, &dattn[h * dh..], c as isize, 1, 0.0, &mut dqkv[2 * c + h * dh..], stride, 1);
        // dP = dO V^T
        gemm_strided(n, dh, n, 1.0, &dattn[h * dh..], c as isize, 1, &cc.qkv[2 * c + h * dh..], 1, stride, 0.0, &mut dp, n as isize, 1);
        for (drow, prow) in dp.chunks_exact_mut(n).zip(p.chunks_exact(n)) {
            let inner: f64 = drow.iter().zip(prow).map(|(d, p)| d * p).sum();
            for (d, &pv) in drow.iter_mut().zip(prow) {
                *d = pv * (*d - inner) * scale;
            }
        }
        // dQ = dS K, dK = dS^T Q
        gemm_strided(n, n, dh, 1.0, &dp, n as isize, 1, &cc.qkv[c + h * dh..], stride, 1, 0.0, &mut dqkv[h * dh..], stride, 1);
        gemm_strided(n, n, dh, 1.0, &dp, 1, n as isize, &cc.qkv[h * dh..], stride, 1, 0.0, &mut dqkv[c + h * dh..], stride, 1);
    }
    let da = linear_backward(&cc.a, n, c, params.get(&l.wqkv), &dqkv, grads, &l.wqkv, &l.bqkv, true)
        .unwrap_or_default();
    let dln = layer_norm_backward(&da, c, params.get(&l.ln1_g), &cc.ln1, grads, &l.ln1_g, &l.ln1_b);
    for (d, v) in dx1.iter_mut().zip(&dln) {
        *d += v;
    }
    dx1
}

/// Applies the transformer to a token sequence; tags and centres pass through.
pub fn transformer_forward(seq: &TokenMatrix, params: &ModelParams) -> Result<TokenMatrix> {
    if seq.dim != params.config().feature_dim {
        return Err(Error::shape(format!("token width {} differs from model width {}", seq.dim, params.config().feature_dim)));
    }
    let mut out = seq.clone();
    forward(&mut out.tokens, seq.len(), params, false)?;
    Ok(out)
}
