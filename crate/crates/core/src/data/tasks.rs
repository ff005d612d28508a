use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::geometry::{farthest_point_sample, random_rotation, Point3, PointCloud, RotationSpec};
use crate::rng::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum TaskKind {
    Reconstruction,
    Denoising,
    Registration,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Reconstruction, TaskKind::Denoising, TaskKind::Registration];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Reconstruction => "reconstruction",
            TaskKind::Denoising => "denoising",
            TaskKind::Registration => "registration",
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<Self> {
        TaskKind::ALL.get(i as usize).copied()
    }
}

impl core::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .iter()
            .copied()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown task {s:?}")))
    }
}

/// Corruption magnitudes for the three tasks.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default, deny_unknown_fields))]
pub struct TaskParams {
    pub sparse_count: usize,
    pub sigma: f64,
    pub max_angle: f64,
}

impl Default for TaskParams {
    fn default() -> Self {
        TaskParams { sparse_count: 128, sigma: 0.05, max_angle: core::f64::consts::FRAC_PI_4 }
    }
}

impl TaskParams {
    pub fn magnitude(&self, task: TaskKind) -> f64 {
        match task {
            TaskKind::Reconstruction => self.sparse_count as f64,
            TaskKind::Denoising => self.sigma,
            TaskKind::Registration => self.max_angle,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskPair {
    pub input: PointCloud,
    pub target: PointCloud,
}

/// Sparse input: `sparse_count` farthest-point samples repeated cyclically up
/// to the cloud size. The target is the dense cloud itself.
pub fn make_reconstruction_pair(cloud: &PointCloud, sparse_count: usize, seed: u64) -> Result<TaskPair> {
    if sparse_count < 8 {
        return Err(Error::invalid(format!("sparse_count must be at least 8, got {sparse_count}")));
    }
    let idx = farthest_point_sample(cloud, sparse_count, seed)?;
    let pts = cloud.points();
    let input = (0..cloud.n_points()).map(|i| pts[idx[i % idx.len()]]).collect();
    Ok(TaskPair { input: PointCloud::new(input)?, target: cloud.clone() })
}

/// i.i.d. per-axis Gaussian offsets, reproducible from the seed.
pub fn gaussian_offsets(n: usize, sigma: f64, seed: u64) -> Result<Vec<Point3>> {
    if !(sigma >= 0.0) {
        return Err(Error::invalid("sigma must be >= 0"));
    }
    if sigma == 0.0 {
        return Ok(alloc::vec![[0.0; 3]; n]);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid(format!("{e}")))?;
    let mut r = rng(seed);
    Ok((0..n).map(|_| [normal.sample(&mut r), normal.sample(&mut r), normal.sample(&mut r)]).collect())
}

/// Noisy input, clean target. The noisy cloud is not renormalized so points
/// keep their correspondence.
pub fn make_denoising_pair(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<TaskPair> {
    let noise = gaussian_offsets(cloud.n_points(), sigma, seed)?;
    let input = cloud.points().iter().zip(&noise).map(|(p, d)| [p[0] + d[0], p[1] + d[1], p[2] + d[2]]).collect();
    Ok(TaskPair { input: PointCloud::new(input)?, target: cloud.clone() })
}

/// Randomly rotated input, original orientation as target.
pub fn make_registration_pair(cloud: &PointCloud, max_angle: f64, seed: u64) -> Result<TaskPair> {
    let rot = random_rotation(seed, max_angle)?;
    Ok(TaskPair { input: crate::geometry::apply_rotation(cloud, &rot, false)?, target: cloud.clone() })
}

/// One draw of the training-time augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentDraw {
    pub rotation: RotationSpec,
    pub scale: f64,
    /// Per-point jitter applied to the input only.
    pub jitter: Vec<Point3>,
}

impl AugmentDraw {
    pub const MAX_ANGLE: f64 = 10.0 * core::f64::consts::PI / 180.0;
    pub const JITTER_SIGMA: f64 = 0.01;

    pub fn identity(n: usize) -> Self {
        AugmentDraw { rotation: RotationSpec::identity(), scale: 1.0, jitter: alloc::vec![[0.0; 3]; n] }
    }

    pub fn sample(seed: u64, n: usize) -> Result<Self> {
        let rotation = random_rotation(seed, Self::MAX_ANGLE)?;
        let scale = rng(seed ^ 0x5ca1e).random_range(0.9..=1.1);
        let jitter = gaussian_offsets(n, Self::JITTER_SIGMA, seed ^ 0x0ff5e7)?;
        Ok(AugmentDraw { rotation, scale, jitter })
    }
}

/// Applies `draw` consistently: both clouds get the same rotation and scale,
/// only the input gets jitter.
pub fn augment_with(pair: &TaskPair, draw: &AugmentDraw) -> Result<TaskPair> {
    if draw.jitter.len() != pair.input.n_points() {
        return Err(Error::shape("jitter length differs from input size"));
    }
    let m = draw.rotation.matrix();
    let s = draw.scale;
    let transform = |p: Point3| {
        let q = crate::geometry::rotation_apply(&m, p);
        [q[0] * s, q[1] * s, q[2] * s]
    };
    let input = pair
        .input
        .points()
        .iter()
        .zip(&draw.jitter)
        .map(|(&p, j)| {
            let q = transform(p);
            [q[0] + j[0], q[1] + j[1], q[2] + j[2]]
        })
        .collect();
    Ok(TaskPair { input: PointCloud::new(input)?, target: pair.target.map(transform)? })
}

pub fn augment(pair: &TaskPair, seed: u64) -> Result<TaskPair> {
    augment_with(pair, &AugmentDraw::sample(seed, pair.input.n_points())?)
}
