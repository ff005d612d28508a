use alloc::format;
use alloc::vec::Vec;

use super::prototypes::DomainPrototype;
use crate::math::{l2_distance, softmax};
use crate::{Error, Result};

/// Euclidean feature distances from one sample to every source prototype.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceProfile {
    /// One entry per domain.
    pub e_global: Vec<f64>,
    /// `R x M`, row `i` holds domain `i`'s per-patch distances.
    pub e_local: Vec<f64>,
    pub patch_count: usize,
}

impl DistanceProfile {
    pub fn domains(&self) -> usize {
        self.e_global.len()
    }

    pub fn local_row(&self, i: usize) -> &[f64] {
        &self.e_local[i * self.patch_count..(i + 1) * self.patch_count]
    }

    pub fn mean_local(&self, i: usize) -> f64 {
        self.local_row(i).iter().sum::<f64>() / self.patch_count as f64
    }

    /// `lambda * e_global + (1 - lambda) * mean_m e_local`, per domain.
    pub fn blended(&self, lambda: f64) -> Vec<f64> {
        (0..self.domains()).map(|i| blend(lambda, self.e_global[i], self.mean_local(i))).collect()
    }
}

pub(crate) fn blend(lambda: f64, global: f64, local: f64) -> f64 {
    lambda * global + (1.0 - lambda) * local
}

/// Mean over patches of the per-patch token distances between two `M x C`
/// matrices.
pub(crate) fn mean_patch_distance(a: &[f64], b: &[f64], c: usize) -> f64 {
    let m = a.len() / c;
    a.chunks_exact(c).zip(b.chunks_exact(c)).map(|(x, y)| l2_distance(x, y)).sum::<f64>() / m as f64
}

pub fn distance_profile(f_global: &[f64], f_local: &[f64], prototypes: &[&DomainPrototype]) -> Result<DistanceProfile> {
    if prototypes.is_empty() {
        return Err(Error::contract("no prototypes"));
    }
    let c = f_global.len();
    if c == 0 || !f_local.len().is_multiple_of(c) {
        return Err(Error::contract("local features are not a whole number of C-vectors"));
    }
    let m = f_local.len() / c;
    let mut e_global = Vec::with_capacity(prototypes.len());
    let mut e_local = Vec::with_capacity(prototypes.len() * m);
    for p in prototypes {
        if p.global.len() != c || p.local.len() != f_local.len() {
            return Err(Error::contract(format!("prototype {} has a different shape than the features", p.key())));
        }
        e_global.push(l2_distance(f_global, &p.global));
        for (x, z) in f_local.chunks_exact(c).zip(p.local.chunks_exact(c)) {
            e_local.push(l2_distance(x, z));
        }
    }
    Ok(DistanceProfile { e_global, e_local, patch_count: m })
}

fn checked_softmax(values: &[f64], negate: bool, what: &str) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::invalid(format!("{what} needs at least one entry")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric { block: 0, detail: format!("non-finite {what} distance") });
    }
    if negate {
        let neg: Vec<f64> = values.iter().map(|v| -v).collect();
        Ok(softmax(&neg))
    } else {
        Ok(softmax(values))
    }
}

/// Domain weights: softmax over the global distances (or their negatives).
pub fn macro_coefficients(e_global: &[f64], negate: bool) -> Result<Vec<f64>> {
    checked_softmax(e_global, negate, "global")
}

/// Patch weights of one domain: softmax over its per-patch distances.
pub fn micro_coefficients(e_local_row: &[f64], negate: bool) -> Result<Vec<f64>> {
    checked_softmax(e_local_row, negate, "local")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftCoefficients {
    pub alpha: Vec<f64>,
    /// `R x M`, each row sums to one.
    pub beta: Vec<f64>,
    pub lambda: f64,
    pub patch_count: usize,
}

impl ShiftCoefficients {
    pub fn from_profile(profile: &DistanceProfile, lambda: f64, negate: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
        }
        let alpha = macro_coefficients(&profile.e_global, negate)?;
        let mut beta = Vec::with_capacity(profile.e_local.len());
        for i in 0..profile.domains() {
            beta.extend(micro_coefficients(profile.local_row(i), negate)?);
        }
        Ok(ShiftCoefficients { alpha, beta, lambda, patch_count: profile.patch_count })
    }

    pub fn beta_row(&self, i: usize) -> &[f64] {
        &self.beta[i * self.patch_count..(i + 1) * self.patch_count]
    }
}

pub(crate) fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        // strict comparison keeps the smallest index among ties
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Index of the source domain minimising the blended distance; ties go to
/// the smallest index.
pub fn select_source_domain(profile: &DistanceProfile, lambda: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
    }
    if profile.domains() == 0 {
        return Err(Error::contract("empty distance profile"));
    }
    Ok(argmin(&profile.blended(lambda)))
}
