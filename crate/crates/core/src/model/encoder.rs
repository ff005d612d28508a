//! Patch tokenizer: a shared per-point MLP max-pooled over each patch, plus a
//! learned positional embedding of the patch centre.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::layers::{gelu_backward, gelu_forward, linear, linear_backward};
use super::tokens::TokenMatrix;
use super::ModelParams;
use crate::geometry::Patches;
use crate::{Error, Result};

pub(crate) struct EncoderCache {
    local: Vec<f64>,
    h1: Vec<f64>,
    t1: Vec<f64>,
    a1: Vec<f64>,
    /// Row (within the patch) that won the max for each (patch, channel).
    argmax: Vec<usize>,
    centers: Vec<f64>,
    p1: Vec<f64>,
    tp1: Vec<f64>,
    q1: Vec<f64>,
    m: usize,
    k: usize,
}

pub(crate) fn encode(patches: &Patches, params: &ModelParams) -> Result<(TokenMatrix, EncoderCache)> {
    let cfg = params.config();
    let (m, k, c) = (patches.len(), patches.k, cfg.feature_dim);
    if k != cfg.patch_size {
        return Err(Error::shape(format!("patch size {k} does not match the model's {}", cfg.patch_size)));
    }
    if patches.points.len() != m * k {
        return Err(Error::shape("patch point buffer is not M * k"));
    }
    let l = &params.layout().patch;
    let hidden = cfg.embed_hidden;
    let local: Vec<f64> = (0..m).flat_map(|i| patches.local(i).flatten().collect::<Vec<_>>()).collect();
    let h1 = linear(&local, m * k, 3, params.get(&l.w1), params.get(&l.b1));
    let (a1, t1) = gelu_forward(&h1);
    let h2 = linear(&a1, m * k, hidden, params.get(&l.w2), params.get(&l.b2));

    let mut tokens = vec![0.0; m * c];
    let mut argmax = vec![0usize; m * c];
    for p in 0..m {
        let out = &mut tokens[p * c..(p + 1) * c];
        let arg = &mut argmax[p * c..(p + 1) * c];
        out.copy_from_slice(&h2[p * k * c..p * k * c + c]);
        for j in 1..k {
            let row = &h2[(p * k + j) * c..(p * k + j + 1) * c];
            for ch in 0..c {
                // strict comparison keeps the first maximiser
                if row[ch] > out[ch] {
                    out[ch] = row[ch];
                    arg[ch] = j;
                }
            }
        }
    }

    let lp = &params.layout().pos;
    let centers: Vec<f64> = patches.centers.iter().flatten().copied().collect();
    let p1 = linear(&centers, m, 3, params.get(&lp.w1), params.get(&lp.b1));
    let (q1, tp1) = gelu_forward(&p1);
    let pos = linear(&q1, m, c, params.get(&lp.w2), params.get(&lp.b2));
    for (t, &p) in tokens.iter_mut().zip(&pos) {
        *t += p;
    }
    let tm = TokenMatrix { dim: c, tokens, pos, centers: patches.centers.clone(), segments: vec![None; m] };
    Ok((tm, EncoderCache { local, h1, t1, a1, argmax, centers, p1, tp1, q1, m, k }))
}

/// Tokenizes a patch set.
pub fn embed_patches(patches: &Patches, params: &ModelParams) -> Result<TokenMatrix> {
    encode(patches, params).map(|(t, _)| t)
}

/// `d_feature` flows through the max-pooled MLP branch, `d_pos` through the
/// positional branch. Either may be `None` when it is identically zero.
pub(crate) fn encode_backward(
    cache: &EncoderCache,
    d_feature: Option<&[f64]>,
    d_pos: &[f64],
    params: &ModelParams,
    grads: &mut [f64],
) {
    let cfg = params.config();
    let (m, k, c, hidden) = (cache.m, cache.k, cfg.feature_dim, cfg.embed_hidden);
    if let Some(df) = d_feature {
        let l = &params.layout().patch;
        // max-pool routes each channel's gradient to a single point, so the
        // second layer's backward is a sparse scatter rather than a GEMM
        let w2 = params.get(&l.w2);
        let mut da1 = vec![0.0; m * k * hidden];
        let mut dw2 = vec![0.0; hidden * c];
        let mut db2 = vec![0.0; c];
        for p in 0..m {
            for ch in 0..c {
                let d = df[p * c + ch];
                if d == 0.0 {
                    continue;
                }
                let row = p * k + cache.argmax[p * c + ch];
                db2[ch] += d;
                let a = &cache.a1[row * hidden..(row + 1) * hidden];
                let da = &mut da1[row * hidden..(row + 1) * hidden];
                for h in 0..hidden {
                    dw2[h * c + ch] += a[h] * d;
                    da[h] += w2[h * c + ch] * d;
                }
            }
        }
        for (g, v) in grads[l.w2.clone()].iter_mut().zip(&dw2) {
            *g += v;
        }
        for (g, v) in grads[l.b2.clone()].iter_mut().zip(&db2) {
            *g += v;
        }
        let dh1 = gelu_backward(&da1, &cache.h1, &cache.t1);
        linear_backward(&cache.local, m * k, 3, params.get(&l.w1), &dh1, grads, &l.w1, &l.b1, false);
    }
    let lp = &params.layout().pos;
    let dq1 = linear_backward(&cache.q1, m, c, params.get(&lp.w2), d_pos, grads, &lp.w2, &lp.b2, true)
        .unwrap_or_default();
    let dp1 = gelu_backward(&dq1, &cache.p1, &cache.tp1);
    linear_backward(&cache.centers, m, 3, params.get(&lp.w1), &dp1, grads, &lp.w1, &lp.b1, false);
}
