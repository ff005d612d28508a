//! Deterministic point-cloud kernels.

mod chamfer;
mod rotation;
mod sampling;

pub use chamfer::{chamfer_distance, chamfer_points, chamfer_with_matches, ChamferMatches};
pub use rotation::{apply_rotation, random_rotation, RotationSpec};
pub(crate) use rotation::rotate_with;

pub(crate) fn rotation_apply(m: &[[f64; 3]; 3], p: Point3) -> Point3 {
    rotate_with(m, p, false)
}
pub use sampling::{farthest_point_sample, group_around, knn_group, PatchSet, Patches};

use alloc::format;
use alloc::vec::Vec;

use crate::math::sqrt;
use crate::{Error, Result};

pub type Point3 = [f64; 3];

pub fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn squared_distance(a: Point3, b: Point3) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

pub fn norm(a: Point3) -> f64 {
    sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
}

/// An ordered set of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite(format!("point {i} has a non-finite coordinate")));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn centroid(&self) -> Point3 {
        let n = self.points.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            for a in 0..3 {
                c[a] += p[a];
            }
        }
        [c[0] / n, c[1] / n, c[2] / n]
    }

    /// Maps every point through `f`, keeping order.
    pub fn map(&self, f: impl Fn(Point3) -> Point3) -> Result<Self> {
        PointCloud::new(self.points.iter().map(|&p| f(p)).collect())
    }
}

/// Centers the cloud on its centroid and scales it so the farthest point has
/// norm 1. Point order is preserved.
pub fn normalize_unit_sphere(cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::invalid("cannot normalize an empty cloud"));
    }
    let c = cloud.centroid();
    let scale = cloud.points.iter().map(|&p| norm(sub(p, c))).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Degenerate("all points coincide; scale is zero".into()));
    }
    cloud.map(|p| {
        let d = sub(p, c);
        [d[0] / scale, d[1] / scale, d[2] / scale]
    })
}
