//! Dense building blocks with explicit backward passes. Activations are
//! row-major `rows x width`; gradients accumulate (`+=`) into the parameter
//! gradient buffer.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::math::{gemm, sqrt, tanh};

pub(crate) const LN_EPS: f64 = 1e-6;
const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_C: f64 = 0.044_715;

/// `x W + b` for `rows` inputs of width `din`.
pub(crate) fn linear(x: &[f64], rows: usize, din: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let dout = b.len();
    let mut y = vec![0.0; rows * dout];
    for row in y.chunks_exact_mut(dout) {
        row.copy_from_slice(b);
    }
    gemm(rows, din, dout, 1.0, x, false, w, false, 1.0, &mut y);
    y
}

/// Accumulates `dW += x^T dy`, `db += sum_rows dy`; returns `dx = dy W^T`
/// when asked.
#[allow(clippy::too_many_arguments)]
pub(crate) fn linear_backward(
    x: &[f64],
    rows: usize,
    din: usize,
    w: &[f64],
    dy: &[f64],
    grads: &mut [f64],
    w_range: &Range<usize>,
    b_range: &Range<usize>,
    want_dx: bool,
) -> Option<Vec<f64>> {
    let dout = b_range.len();
    gemm(din, rows, dout, 1.0, x, true, dy, false, 1.0, &mut grads[w_range.clone()]);
    let db = &mut grads[b_range.clone()];
    for row in dy.chunks_exact(dout) {
        for (g, &d) in db.iter_mut().zip(row) {
            *g += d;
        }
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; rows * din];
        gemm(rows, dout, din, 1.0, dy, false, w, true, 0.0, &mut dx);
        dx
    })
}

#[cfg(test)]
pub(crate) fn gelu(u: f64) -> f64 {
    0.5 * u * (1.0 + tanh(GELU_K * (u + GELU_C * u * u * u)))
}

#[cfg(test)]
pub(crate) fn gelu_grad(u: f64) -> f64 {
    gelu_grad_with(u, tanh(GELU_K * (u + GELU_C * u * u * u)))
}

fn gelu_grad_with(u: f64, t: f64) -> f64 {
    0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * u * u)
}

/// Element-wise GELU; also returns the inner tanh terms for the backward pass.
pub(crate) fn gelu_forward(u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let t: Vec<f64> = u.iter().map(|&v| tanh(GELU_K * (v + GELU_C * v * v * v))).collect();
    let a = u.iter().zip(&t).map(|(&v, &tv)| 0.5 * v * (1.0 + tv)).collect();
    (a, t)
}

pub(crate) fn gelu_backward(d: &[f64], u: &[f64], t: &[f64]) -> Vec<f64> {
    d.iter().zip(u).zip(t).map(|((&dv, &uv), &tv)| dv * gelu_grad_with(uv, tv)).collect()
}

pub(crate) struct LayerNormCache {
    pub xhat: Vec<f64>,
    pub rstd: Vec<f64>,
}

pub(crate) fn layer_norm(x: &[f64], width: usize, gamma: &[f64], beta: &[f64]) -> (Vec<f64>, LayerNormCache) {
    let rows = x.len() / width;
    let mut y = vec![0.0; x.len()];
    let mut xhat = vec![0.0; x.len()];
    let mut rstd = vec![0.0; rows];
    for r in 0..rows {
        let row = &x[r * width..(r + 1) * width];
        let mean = row.iter().sum::<f64>() / width as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let s = 1.0 / sqrt(var + LN_EPS);
        rstd[r] = s;
        for c in 0..width {
            let h = (row[c] - mean) * s;
            xhat[r * width + c] = h;
            y[r * width + c] = gamma[c] * h + beta[c];
        }
    }
    (y, LayerNormCache { xhat, rstd })
}

pub(crate) fn layer_norm_backward(
    dy: &[f64],
    width: usize,
    gamma: &[f64],
    cache: &LayerNormCache,
    grads: &mut [f64],
    g_range: &Range<usize>,
    b_range: &Range<usize>,
) -> Vec<f64> {
    let rows = dy.len() / width;
    let mut dx = vec![0.0; dy.len()];
    let mut dgamma = vec![0.0; width];
    let mut dbeta = vec![0.0; width];
    let mut dxhat = vec![0.0; width];
    for r in 0..rows {
        let dyr = &dy[r * width..(r + 1) * width];
        let xh = &cache.xhat[r * width..(r + 1) * width];
        let (mut mean_d, mut mean_dx) = (0.0, 0.0);
        for c in 0..width {
            dgamma[c] += dyr[c] * xh[c];
            dbeta[c] += dyr[c];
            dxhat[c] = dyr[c] * gamma[c];
            mean_d += dxhat[c];
            mean_dx += dxhat[c] * xh[c];
        }
        mean_d /= width as f64;
        mean_dx /= width as f64;
        for c in 0..width {
            dx[r * width + c] = cache.rstd[r] * (dxhat[c] - mean_d - xh[c] * mean_dx);
        }
    }
    for (g, d) in grads[g_range.clone()].iter_mut().zip(&dgamma) {
        *g += d;
    }
    for (g, d) in grads[b_range.clone()].iter_mut().zip(&dbeta) {
        *g += d;
    }
    dx
}
