use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::geometry::{normalize_unit_sphere, squared_distance, Point3, PointCloud};
use crate::math::{cos, exp, ln, sin, sqrt};
use crate::rng::{rng, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum DensityProfile {
    Uniform,
    SurfaceClustered,
}

/// The acquisition "look" of a domain: sampling density, sensor noise,
/// occlusion and resolution.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DomainStyle {
    pub name: String,
    pub density_profile: DensityProfile,
    /// Gaussian jitter standard deviation, as a fraction of the unit radius.
    pub noise_sigma: f64,
    /// Fraction of points removed by a half-space cut, in `[0, 0.5)`.
    pub occlusion_fraction: f64,
    /// Range of the fraction of points kept when resampling, within `(0, 1]`.
    pub resolution_jitter: (f64, f64),
}

impl DomainStyle {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.resolution_jitter;
        if self.name.is_empty() {
            return Err(Error::Config("domain style needs a name".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config(format!("{}: noise_sigma must be >= 0", self.name)));
        }
        if !(0.0..0.5).contains(&self.occlusion_fraction) {
            return Err(Error::Config(format!("{}: occlusion_fraction must lie in [0, 0.5)", self.name)));
        }
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("{}: resolution_jitter must satisfy 0 < lo <= hi <= 1", self.name)));
        }
        Ok(())
    }

    fn preset(name: &str, density_profile: DensityProfile, noise: f64, occlusion: f64, res: (f64, f64)) -> Self {
        DomainStyle {
            name: name.to_string(),
            density_profile,
            noise_sigma: noise,
            occlusion_fraction: occlusion,
            resolution_jitter: res,
        }
    }

    /// Synthetic-looking: uniform, dense, noiseless.
    pub fn clean_dense() -> Self {
        Self::preset("clean-dense", DensityProfile::Uniform, 0.0, 0.0, (1.0, 1.0))
    }

    /// Synthetic with uneven sampling density.
    pub fn clean_clustered() -> Self {
        Self::preset("clean-clustered", DensityProfile::SurfaceClustered, 0.0, 0.0, (0.5, 0.8))
    }

    /// Scan-like: sensor noise plus a missing side.
    pub fn scan_noisy_occluded() -> Self {
        Self::preset("scan-noisy-occluded", DensityProfile::Uniform, 0.02, 0.25, (0.7, 1.0))
    }

    /// Scan-like: coarse resolution with mild noise.
    pub fn low_res_jittered() -> Self {
        Self::preset("low-res-jittered", DensityProfile::Uniform, 0.01, 0.0, (0.15, 0.3))
    }

    pub fn presets() -> [DomainStyle; 4] {
        [Self::clean_dense(), Self::clean_clustered(), Self::scan_noisy_occluded(), Self::low_res_jittered()]
    }
}

/// The half-space `{p : <normal, p> <= offset}` kept by an occlusion cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occlusion {
    pub normal: Point3,
    pub offset: f64,
}

impl Occlusion {
    pub fn keeps(&self, p: Point3) -> bool {
        self.normal[0] * p[0] + self.normal[1] * p[1] + self.normal[2] * p[2] <= self.offset
    }
}

/// Removes the `ceil(fraction * n)` points lying farthest along a random
/// direction. Survivors keep their order.
pub fn occlude(points: &[Point3], fraction: f64, r: &mut Rng) -> (Vec<Point3>, Occlusion) {
    let z: f64 = r.random_range(-1.0..=1.0);
    let phi: f64 = r.random_range(0.0..core::f64::consts::TAU);
    let rho = sqrt((1.0 - z * z).max(0.0));
    let normal = [rho * cos(phi), rho * sin(phi), z];
    let proj: Vec<f64> = points.iter().map(|p| normal[0] * p[0] + normal[1] * p[1] + normal[2] * p[2]).collect();
    let remove = libm::ceil(fraction * points.len() as f64) as usize;
    let keep = points.len() - remove.min(points.len().saturating_sub(1));
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let offset = proj[order[keep - 1]];
    let mut kept_idx: Vec<usize> = order[..keep].to_vec();
    kept_idx.sort_unstable();
    (kept_idx.into_iter().map(|i| points[i]).collect(), Occlusion { normal, offset })
}

fn resample(points: &[Point3], style: &DomainStyle, r: &mut Rng) -> Vec<Point3> {
    let (lo, hi) = style.resolution_jitter;
    let factor = if hi > lo { r.random_range(lo..=hi) } else { lo };
    let n = points.len();
    let keep = (libm::round(factor * n as f64) as usize).clamp(1, n);
    if keep == n {
        return points.to_vec();
    }
    // Weighted sampling without replacement (exponential keys); uniform
    // weights reduce it to a plain random subset.
    let weights: Vec<f64> = match style.density_profile {
        DensityProfile::Uniform => alloc::vec![1.0; n],
        DensityProfile::SurfaceClustered => {
            let anchors: Vec<Point3> = (0..4).map(|_| points[r.random_range(0..n)]).collect();
            points
                .iter()
                .map(|&p| {
                    let d2 = anchors.iter().map(|&a| squared_distance(p, a)).fold(f64::MAX, f64::min);
                    exp(-d2 / (2.0 * 0.3 * 0.3)) + 0.05
                })
                .collect()
        }
    };
    let mut keyed: Vec<(f64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = r.random_range(f64::MIN_POSITIVE..1.0);
            (ln(u) / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut idx: Vec<usize> = keyed[..keep].iter().map(|&(_, i)| i).collect();
    idx.sort_unstable();
    idx.into_iter().map(|i| points[i]).collect()
}

/// Pads by cyclic repetition or trims to the first `n` of a random subset.
pub(crate) fn fit_to(points: Vec<Point3>, n: usize, r: &mut Rng) -> Vec<Point3> {
    use core::cmp::Ordering;
    match points.len().cmp(&n) {
        Ordering::Equal => points,
        Ordering::Less => (0..n).map(|i| points[i % points.len()]).collect(),
        Ordering::Greater => {
            let mut idx = rand::seq::index::sample(r, points.len(), n).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| points[i]).collect()
        }
    }
}

/// Applies a domain style: resolution jitter, occlusion cut, Gaussian jitter,
/// renormalization, then pad/trim to `n_out` points.
pub fn stylize(cloud: &PointCloud, style: &DomainStyle, seed: u64, n_out: usize) -> Result<PointCloud> {
    style.validate()?;
    let mut r = rng(seed);
    let mut pts = resample(cloud.points(), style, &mut r);
    if style.occlusion_fraction > 0.0 {
        pts = occlude(&pts, style.occlusion_fraction, &mut r).0;
    }
    if style.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, style.noise_sigma).map_err(|e| Error::invalid(format!("{e}")))?;
        for p in &mut pts {
            for c in p.iter_mut() {
                *c += normal.sample(&mut r);
            }
        }
    }
    let pts = normalize_unit_sphere(&PointCloud::new(pts)?)?.into_points();
    PointCloud::new(fit_to(pts, n_out, &mut r))
}
