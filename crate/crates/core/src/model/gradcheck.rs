//! Finite-difference verification of the analytic gradients.

use alloc::vec;
use alloc::vec::Vec;

use super::pass::Example;
use super::ModelParams;
use crate::rng::rng;
use crate::{Error, Result};

/// Gradients smaller than this are compared in absolute rather than relative terms.
pub const GRADIENT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub checked: usize,
    /// Analytic gradients of the checked parameters.
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub indices: Vec<usize>,
}

/// Mean loss over `batch` and its analytic gradient, scaled by `scale`.
pub fn batch_gradient(params: &ModelParams, batch: &[Example], scale: f64) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let mut grads = vec![0.0; params.len()];
    let w = scale / batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        total += ex.accumulate_gradient(params, &mut grads, w)?;
    }
    Ok((total / batch.len() as f64, grads))
}

pub fn batch_loss(params: &ModelParams, batch: &[Example]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        total += ex.loss(params)?;
    }
    Ok(total / batch.len().max(1) as f64)
}

/// Compares analytic gradients against central differences with step
/// `epsilon` on `count` randomly chosen parameters (all of them if fewer).
pub fn gradient_check(params: &ModelParams, batch: &[Example], epsilon: f64, count: usize, seed: u64) -> Result<GradCheckReport> {
    let (_, grads) = batch_gradient(params, batch, 1.0)?;
    let indices: Vec<usize> = if count >= params.len() {
        (0..params.len()).collect()
    } else {
        let mut idx = rand::seq::index::sample(&mut rng(seed), params.len(), count).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        checked: indices.len(),
        analytic: Vec::with_capacity(indices.len()),
        numeric: Vec::with_capacity(indices.len()),
        indices: indices.clone(),
    };
    for &i in &indices {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + epsilon;
        let up = batch_loss(&probe, batch)?;
        probe.values_mut()[i] = orig - epsilon;
        let down = batch_loss(&probe, batch)?;
        probe.values_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let analytic = grads[i];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRADIENT_FLOOR);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst_index = i;
        }
        report.analytic.push(analytic);
        report.numeric.push(numeric);
    }
    Ok(report)
}
