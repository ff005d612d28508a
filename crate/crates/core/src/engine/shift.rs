use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng as _;

use super::coefficients::{argmin, select_source_domain, DistanceProfile, ShiftCoefficients};
use super::prototypes::DomainPrototype;
use crate::rng::rng;
use crate::{Error, Result};

/// Test-time feature shifting strategies, from no shift to the full
/// dual-level shift, including every ablation variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ShiftMode {
    None,
    RandomAverageOne,
    GlobalOnlyAverageOne,
    LocalOnlyAverageOne,
    DualAverageOne,
    DualAverageAll,
    MacroOnly,
    MicroOnly,
    Full,
}

impl ShiftMode {
    pub const ALL: [ShiftMode; 9] = [
        ShiftMode::None,
        ShiftMode::RandomAverageOne,
        ShiftMode::GlobalOnlyAverageOne,
        ShiftMode::LocalOnlyAverageOne,
        ShiftMode::DualAverageOne,
        ShiftMode::DualAverageAll,
        ShiftMode::MacroOnly,
        ShiftMode::MicroOnly,
        ShiftMode::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ShiftMode::None => "none",
            ShiftMode::RandomAverageOne => "random-average-one",
            ShiftMode::GlobalOnlyAverageOne => "global-only-average-one",
            ShiftMode::LocalOnlyAverageOne => "local-only-average-one",
            ShiftMode::DualAverageOne => "dual-average-one",
            ShiftMode::DualAverageAll => "dual-average-all",
            ShiftMode::MacroOnly => "macro-only",
            ShiftMode::MicroOnly => "micro-only",
            ShiftMode::Full => "full",
        }
    }

    /// Modes whose per-column weights always sum to one.
    pub fn is_convex(self) -> bool {
        !matches!(self, ShiftMode::MicroOnly | ShiftMode::Full)
    }

    /// Comma-separated list of every mode name.
    pub fn valid_names() -> String {
        let names: Vec<&str> = Self::ALL.iter().map(|m| m.as_str()).collect();
        names.join(", ")
    }
}

impl fmt::Display for ShiftMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ShiftMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::contract(format!("unknown shift mode {s:?}; valid modes: {}", Self::valid_names())))
    }
}

#[cfg(feature = "serde")]
impl serde::Serialize for ShiftMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[cfg(feature = "serde")]
impl<'de> serde::Deserialize<'de> for ShiftMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = <String as serde::Deserialize>::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shifted column `m` is `own[m] * F^m + sum_i proto[m * R + i] * Z^{i,m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftWeights {
    pub own: Vec<f64>,
    /// `M x R`.
    pub proto: Vec<f64>,
    pub domains: usize,
}

impl ShiftWeights {
    fn new(m: usize, r: usize) -> Self {
        ShiftWeights { own: vec![0.0; m], proto: vec![0.0; m * r], domains: r }
    }

    /// Total coefficient mass of each column.
    pub fn mass(&self) -> Vec<f64> {
        self.own
            .iter()
            .enumerate()
            .map(|(m, &o)| o + self.proto[m * self.domains..(m + 1) * self.domains].iter().sum::<f64>())
            .collect()
    }

    fn midpoint(m: usize, r: usize, anchor: usize) -> Self {
        let mut w = Self::new(m, r);
        for col in 0..m {
            w.own[col] = 0.5;
            w.proto[col * r + anchor] = 0.5;
        }
        w
    }
}

/// Per-column weights of `mode`. `None` yields `own = 1`, no prototype weight.
pub fn shift_weights(profile: &DistanceProfile, coeffs: &ShiftCoefficients, mode: ShiftMode, seed: u64) -> Result<ShiftWeights> {
    let r = profile.domains();
    let m = profile.patch_count;
    if r == 0 || coeffs.alpha.len() != r || coeffs.beta.len() != r * m {
        return Err(Error::contract("coefficients do not match the distance profile"));
    }
    let rf = r as f64;
    Ok(match mode {
        ShiftMode::None => {
            let mut w = ShiftWeights::new(m, r);
            w.own.fill(1.0);
            w
        }
        ShiftMode::RandomAverageOne => ShiftWeights::midpoint(m, r, rng(seed).random_range(0..r)),
        ShiftMode::GlobalOnlyAverageOne => ShiftWeights::midpoint(m, r, argmin(&profile.e_global)),
        ShiftMode::LocalOnlyAverageOne => {
            let means: Vec<f64> = (0..r).map(|i| profile.mean_local(i)).collect();
            ShiftWeights::midpoint(m, r, argmin(&means))
        }
        ShiftMode::DualAverageOne => ShiftWeights::midpoint(m, r, select_source_domain(profile, coeffs.lambda)?),
        ShiftMode::DualAverageAll => {
            let mut w = ShiftWeights::new(m, r);
            w.own.fill(0.5);
            w.proto.fill(0.5 / rf);
            w
        }
        ShiftMode::MacroOnly => {
            let mut w = ShiftWeights::new(m, r);
            let own = coeffs.alpha.iter().sum::<f64>() / rf;
            for col in 0..m {
                w.own[col] = own;
                for i in 0..r {
                    w.proto[col * r + i] = (1.0 - coeffs.alpha[i]) / rf;
                }
            }
            w
        }
        ShiftMode::MicroOnly | ShiftMode::Full => {
            let uniform = vec![1.0 / rf; r];
            let alpha = if mode == ShiftMode::Full { &coeffs.alpha } else { &uniform };
            let mut w = ShiftWeights::new(m, r);
            for col in 0..m {
                let mut own = 0.0;
                for i in 0..r {
                    let b = coeffs.beta_row(i)[col];
                    own += alpha[i] * b;
                    w.proto[col * r + i] = (1.0 - alpha[i]) * (1.0 - b) / rf;
                }
                w.own[col] = own / rf;
            }
            w
        }
    })
}

/// Applies `weights` to the `M x C` features using each domain's local
/// prototype.
pub fn apply_shift(f_local: &[f64], prototypes: &[&DomainPrototype], weights: &ShiftWeights, c: usize) -> Result<Vec<f64>> {
    let m = weights.own.len();
    if f_local.len() != m * c || prototypes.len() != weights.domains {
        return Err(Error::contract("shift weights do not match features or prototypes"));
    }
    if prototypes.iter().any(|p| p.local.len() != m * c) {
        return Err(Error::contract("prototype shape differs from the features"));
    }
    let r = weights.domains;
    let mut out = vec![0.0; m * c];
    for col in 0..m {
        let dst = &mut out[col * c..(col + 1) * c];
        let own = weights.own[col];
        for (d, &f) in dst.iter_mut().zip(&f_local[col * c..(col + 1) * c]) {
            *d = own * f;
        }
        for (i, p) in prototypes.iter().enumerate() {
            let w = weights.proto[col * r + i];
            if w == 0.0 {
                continue;
            }
            for (d, &z) in dst.iter_mut().zip(p.patch(col, c)) {
                *d += w * z;
            }
        }
    }
    Ok(out)
}

/// Shifted `M x C` features for `mode`. `None` returns the input unchanged.
pub fn shift_features(
    f_local: &[f64],
    prototypes: &[&DomainPrototype],
    profile: &DistanceProfile,
    coeffs: &ShiftCoefficients,
    mode: ShiftMode,
    seed: u64,
) -> Result<Vec<f64>> {
    if mode == ShiftMode::None {
        return Ok(f_local.to_vec());
    }
    let m = profile.patch_count;
    if m == 0 || !f_local.len().is_multiple_of(m) {
        return Err(Error::contract("features are not M columns"));
    }
    let weights = shift_weights(profile, coeffs, mode, seed)?;
    apply_shift(f_local, prototypes, &weights, f_local.len() / m)
}
