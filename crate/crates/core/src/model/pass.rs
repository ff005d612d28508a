//! Full forward/backward pass for one in-context example and the
//! masked-patch Chamfer loss.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::encoder::{encode, encode_backward};
use super::head::{head_backward, head_forward};
use super::tokens::{apply_mask, assemble_icl_sequence, Segment, TokenMatrix};
use super::transformer;
use super::ModelParams;
use crate::geometry::{chamfer_points, chamfer_with_matches, farthest_point_sample, group_around, knn_group, Patches, Point3, PointCloud};
use crate::{Error, Result};

/// An input/target pair cut into patches that line up position by position:
/// the target is grouped around the input's patch centres.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchedPair {
    pub input: Patches,
    pub target: Patches,
}

/// Farthest-point centres (starting at index 0) with k-nearest-neighbour
/// groups, in canonical order.
pub fn patchify(cloud: &PointCloud, m: usize, k: usize) -> Result<Patches> {
    let centers = farthest_point_sample(cloud, m, 0)?;
    Ok(knn_group(cloud, &centers, k)?.materialize(cloud))
}

pub fn patchify_pair(input: &PointCloud, target: &PointCloud, m: usize, k: usize) -> Result<PatchedPair> {
    let input = patchify(input, m, k)?;
    let target = group_around(target, &input.centers, k)?;
    Ok(PatchedPair { input, target })
}

/// Mean Chamfer distance over corresponding patches.
pub fn loss(pred: &[Vec<Point3>], gt: &[&[Point3]]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(Error::contract(format!("{} predicted patches for {} ground-truth patches", pred.len(), gt.len())));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (p, g) in pred.iter().zip(gt) {
        total += chamfer_points(p, g)?;
    }
    Ok(total / pred.len() as f64)
}

/// Chamfer value and `weight * dCD/dpred`, routing each min term to its
/// matched neighbour.
fn chamfer_grad(pred: &[Point3], gt: &[Point3], weight: f64) -> Result<(f64, Vec<Point3>)> {
    let m = chamfer_with_matches(pred, gt)?;
    let mut grad = vec![[0.0; 3]; pred.len()];
    let wp = 2.0 * weight / pred.len() as f64;
    for (i, &j) in m.pred_to_gt.iter().enumerate() {
        for a in 0..3 {
            grad[i][a] += wp * (pred[i][a] - gt[j][a]);
        }
    }
    let wg = 2.0 * weight / gt.len() as f64;
    for (j, &i) in m.gt_to_pred.iter().enumerate() {
        for a in 0..3 {
            grad[i][a] += wg * (pred[i][a] - gt[j][a]);
        }
    }
    Ok((m.value, grad))
}

fn check_pair(pair: &PatchedPair, params: &ModelParams) -> Result<()> {
    let cfg = params.config();
    for p in [&pair.input, &pair.target] {
        if p.len() != cfg.patch_count || p.k != cfg.patch_size {
            return Err(Error::shape(format!(
                "pair has {} patches of {}, model expects {} of {}",
                p.len(),
                p.k,
                cfg.patch_count,
                cfg.patch_size
            )));
        }
    }
    Ok(())
}

/// A query pair, a prompt pair and the query-target patches to mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub query: PatchedPair,
    pub prompt: PatchedPair,
    pub masked: Vec<usize>,
}

impl Example {
    pub fn loss(&self, params: &ModelParams) -> Result<f64> {
        example_loss(&self.query, &self.prompt, &self.masked, params, None, 1.0)
    }

    /// Loss and `scale * dloss/dparams` accumulated into `grads`.
    pub fn accumulate_gradient(&self, params: &ModelParams, grads: &mut [f64], scale: f64) -> Result<f64> {
        if grads.len() != params.len() {
            return Err(Error::shape("gradient buffer length differs from parameter count"));
        }
        example_loss(&self.query, &self.prompt, &self.masked, params, Some(grads), scale)
    }
}

/// Masked-patch loss of one example. When `grads` is given, adds
/// `scale * dloss/dparams` into it.
pub(crate) fn example_loss(
    query: &PatchedPair,
    prompt: &PatchedPair,
    masked: &[usize],
    params: &ModelParams,
    grads: Option<&mut [f64]>,
    scale: f64,
) -> Result<f64> {
    check_pair(query, params)?;
    check_pair(prompt, params)?;
    if masked.is_empty() {
        return Ok(0.0);
    }
    let c = params.config().feature_dim;
    let m = params.config().patch_count;
    let parts = [&query.input, &query.target, &prompt.input, &prompt.target];
    let mut tokens = Vec::with_capacity(4);
    let mut caches = Vec::with_capacity(4);
    for p in parts {
        let (t, cache) = encode(p, params)?;
        tokens.push(t);
        caches.push(cache);
    }
    let seq = assemble_icl_sequence(&tokens[0], &tokens[1], &tokens[2], &tokens[3])?;
    let mask_token = params.get(&params.layout().mask_token);
    let seq = apply_mask(&seq, masked, mask_token)?;
    let n = seq.len();
    let mut x = seq.tokens;
    let blocks = transformer::forward(&mut x, n, params, grads.is_some())?;

    let rows: Vec<f64> = masked.iter().flat_map(|&i| x[(m + i) * c..(m + i + 1) * c].iter().copied()).collect();
    let centers: Vec<Point3> = masked.iter().map(|&i| seq.centers[m + i]).collect();
    let (pred, head_cache) = head_forward(&rows, &centers, params);
    let k = params.config().patch_size;
    let weight = scale / masked.len() as f64;
    let mut total = 0.0;
    let mut dpred = Vec::with_capacity(pred.len());
    for (p, &i) in pred.chunks_exact(k).zip(masked) {
        let (v, g) = chamfer_grad(p, query.target.patch(i), weight)?;
        total += v;
        dpred.extend(g);
    }
    let value = total / masked.len() as f64;
    if !value.is_finite() {
        return Err(Error::NonFinite("example loss".into()));
    }
    let Some(grads) = grads else {
        return Ok(value);
    };

    let drows = head_backward(&dpred, &head_cache, params, grads);
    let mut dx = vec![0.0; n * c];
    for (r, &i) in masked.iter().enumerate() {
        dx[(m + i) * c..(m + i + 1) * c].copy_from_slice(&drows[r * c..(r + 1) * c]);
    }
    transformer::backward(&mut dx, n, params, &blocks, grads);

    for (s, cache) in caches.iter().enumerate() {
        let d = &dx[s * m * c..(s + 1) * m * c];
        if Segment::ORDER[s] == Segment::QueryTarget {
            let mut dfeat = d.to_vec();
            let mask_range = params.layout().mask_token.clone();
            for &i in masked {
                for ch in 0..c {
                    grads[mask_range.start + ch] += d[i * c + ch];
                    dfeat[i * c + ch] = 0.0;
                }
            }
            encode_backward(cache, Some(&dfeat), d, params, grads);
        } else {
            encode_backward(cache, Some(d), d, params, grads);
        }
    }
    Ok(value)
}

/// Runs the sequence `[query_input, mask x M, prompt_input, prompt_target]`
/// and returns all `M * k` predicted points of the query target.
pub fn predict_from_tokens(
    query_input: &TokenMatrix,
    prompt_input: &TokenMatrix,
    prompt_target: &TokenMatrix,
    params: &ModelParams,
) -> Result<Vec<Point3>> {
    let m = query_input.len();
    if m != params.config().patch_count {
        return Err(Error::shape(format!("{m} query tokens, model expects {}", params.config().patch_count)));
    }
    let mask_token = params.get(&params.layout().mask_token);
    let c = query_input.dim;
    let mut target = query_input.clone();
    for (t, p) in target.tokens.chunks_exact_mut(c).zip(query_input.pos.chunks_exact(c)) {
        for ch in 0..c {
            t[ch] = mask_token[ch] + p[ch];
        }
    }
    let seq = assemble_icl_sequence(query_input, &target, prompt_input, prompt_target)?;
    let n = seq.len();
    let mut x = seq.tokens;
    transformer::forward(&mut x, n, params, false)?;
    let (pts, _) = head_forward(&x[m * c..2 * m * c], &seq.centers[m..2 * m], params);
    Ok(pts)
}
