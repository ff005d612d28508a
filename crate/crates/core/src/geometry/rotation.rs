use rand::Rng as _;

use super::{Point3, PointCloud};
use crate::math::{cos, sin, sqrt};
use crate::rng::rng;
use crate::{Error, Result};

/// Axis-angle rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotationSpec {
    pub axis: Point3,
    pub angle: f64,
}

impl RotationSpec {
    pub fn identity() -> Self {
        RotationSpec { axis: [0.0, 0.0, 1.0], angle: 0.0 }
    }

    /// Rodrigues' formula.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let [x, y, z] = self.axis;
        let (s, c) = (sin(self.angle), cos(self.angle));
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }

    pub fn rotate(&self, p: Point3, inverse: bool) -> Point3 {
        rotate_with(&self.matrix(), p, inverse)
    }
}

pub(crate) fn rotate_with(r: &[[f64; 3]; 3], p: Point3, inverse: bool) -> Point3 {
    let mut out = [0.0; 3];
    for i in 0..3 {
        for j in 0..3 {
            let rij = if inverse { r[j][i] } else { r[i][j] };
            out[i] += rij * p[j];
        }
    }
    out
}

/// Axis uniform on the unit sphere, angle uniform in `[0, max_angle]`.
pub fn random_rotation(seed: u64, max_angle: f64) -> Result<RotationSpec> {
    if !(max_angle > 0.0 && max_angle <= core::f64::consts::PI) {
        return Err(Error::invalid("max_angle must lie in (0, pi]"));
    }
    let mut r = rng(seed);
    let z: f64 = r.random_range(-1.0..=1.0);
    let phi: f64 = r.random_range(0.0..core::f64::consts::TAU);
    let rho = sqrt((1.0 - z * z).max(0.0));
    let axis = [rho * cos(phi), rho * sin(phi), z];
    let angle = r.random::<f64>() * max_angle;
    Ok(RotationSpec { axis, angle })
}

pub fn apply_rotation(cloud: &PointCloud, rot: &RotationSpec, inverse: bool) -> Result<PointCloud> {
    let m = rot.matrix();
    cloud.map(|p| rotate_with(&m, p, inverse))
}
