use alloc::format;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::geometry::{normalize_unit_sphere, Point3, PointCloud};
use crate::math::{cos, sin, sqrt};
use crate::rng::{rng, Rng};
use crate::{Error, Result};

/// Procedural object categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ShapeKind {
    Sphere,
    Box,
    Cylinder,
    TableComposite,
    ChairComposite,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 5] =
        [ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::TableComposite, ShapeKind::ChairComposite];

    pub fn as_str(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Box => "box",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::TableComposite => "table_composite",
            ShapeKind::ChairComposite => "chair_composite",
        }
    }
}

impl core::str::FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown shape kind {s:?}")))
    }
}

enum Surface {
    /// origin + s*u + t*v for s, t in [0, 1]
    Rect { origin: Point3, u: Point3, v: Point3 },
    Sphere { radius: f64 },
    /// Lateral surface of a z-aligned cylinder centred at the origin.
    Tube { radius: f64, height: f64 },
    /// Disk of the given radius in the plane z = height.
    Disk { radius: f64, z: f64 },
}

fn cross_norm(u: Point3, v: Point3) -> f64 {
    let c = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
}

impl Surface {
    fn area(&self) -> f64 {
        use core::f64::consts::PI;
        match *self {
            Surface::Rect { u, v, .. } => cross_norm(u, v),
            Surface::Sphere { radius } => 4.0 * PI * radius * radius,
            Surface::Tube { radius, height } => 2.0 * PI * radius * height,
            Surface::Disk { radius, .. } => PI * radius * radius,
        }
    }

    fn sample(&self, r: &mut Rng) -> Point3 {
        use core::f64::consts::TAU;
        match *self {
            Surface::Rect { origin, u, v } => {
                let (s, t): (f64, f64) = (r.random(), r.random());
                [0, 1, 2].map(|a| origin[a] + s * u[a] + t * v[a])
            }
            Surface::Sphere { radius } => {
                let z: f64 = r.random_range(-1.0..=1.0);
                let phi: f64 = r.random_range(0.0..TAU);
                let rho = sqrt((1.0 - z * z).max(0.0));
                [radius * rho * cos(phi), radius * rho * sin(phi), radius * z]
            }
            Surface::Tube { radius, height } => {
                let phi: f64 = r.random_range(0.0..TAU);
                let z: f64 = r.random_range(-0.5..=0.5) * height;
                [radius * cos(phi), radius * sin(phi), z]
            }
            Surface::Disk { radius, z } => {
                let rho = radius * sqrt(r.random::<f64>());
                let phi: f64 = r.random_range(0.0..TAU);
                [rho * cos(phi), rho * sin(phi), z]
            }
        }
    }
}

/// The six faces of the axis-aligned box `[lo, lo + size]`.
fn box_faces(lo: Point3, size: Point3, out: &mut Vec<Surface>) {
    let [sx, sy, sz] = size;
    let ex = [sx, 0.0, 0.0];
    let ey = [0.0, sy, 0.0];
    let ez = [0.0, 0.0, sz];
    let shift = |d: Point3| [lo[0] + d[0], lo[1] + d[1], lo[2] + d[2]];
    out.push(Surface::Rect { origin: lo, u: ey, v: ez });
    out.push(Surface::Rect { origin: shift(ex), u: ey, v: ez });
    out.push(Surface::Rect { origin: lo, u: ex, v: ez });
    out.push(Surface::Rect { origin: shift(ey), u: ex, v: ez });
    out.push(Surface::Rect { origin: lo, u: ex, v: ey });
    out.push(Surface::Rect { origin: shift(ez), u: ex, v: ey });
}

fn legs(r: &mut Rng, width: f64, depth: f64, height: f64, out: &mut Vec<Surface>) {
    let t: f64 = r.random_range(0.04..0.08);
    for &(x, y) in &[(0.0, 0.0), (width - t, 0.0), (0.0, depth - t), (width - t, depth - t)] {
        box_faces([x, y, 0.0], [t, t, height], out);
    }
}

fn surfaces(kind: ShapeKind, r: &mut Rng) -> Vec<Surface> {
    let mut s = Vec::new();
    match kind {
        ShapeKind::Sphere => s.push(Surface::Sphere { radius: 1.0 }),
        ShapeKind::Box => {
            let size = [r.random_range(0.5..1.0), r.random_range(0.5..1.0), r.random_range(0.5..1.0)];
            box_faces([0.0; 3], size, &mut s);
        }
        ShapeKind::Cylinder => {
            let radius = r.random_range(0.3..0.6);
            let height = r.random_range(0.6..1.4);
            s.push(Surface::Tube { radius, height });
            s.push(Surface::Disk { radius, z: -height / 2.0 });
            s.push(Surface::Disk { radius, z: height / 2.0 });
        }
        ShapeKind::TableComposite => {
            let (w, d) = (r.random_range(0.8..1.2), r.random_range(0.5..0.9));
            let h = r.random_range(0.6..0.9);
            let top = r.random_range(0.04..0.08);
            box_faces([0.0, 0.0, h], [w, d, top], &mut s);
            legs(r, w, d, h, &mut s);
        }
        ShapeKind::ChairComposite => {
            let (w, d) = (r.random_range(0.4..0.6), r.random_range(0.4..0.6));
            let h = r.random_range(0.4..0.5);
            let seat = r.random_range(0.04..0.07);
            let back = r.random_range(0.4..0.7);
            box_faces([0.0, 0.0, h], [w, d, seat], &mut s);
            box_faces([0.0, d - seat, h + seat], [w, seat, back], &mut s);
            legs(r, w, d, h, &mut s);
        }
    }
    s
}

pub(crate) fn sample_surface_points(kind: ShapeKind, n: usize, seed: u64) -> Vec<Point3> {
    let mut r = rng(seed);
    if kind == ShapeKind::Sphere {
        // antipodal pairs keep the centroid at the origin, so normalization
        // leaves every point on the unit sphere
        let sphere = Surface::Sphere { radius: 1.0 };
        let mut pts = Vec::with_capacity(n + 1);
        while pts.len() < n {
            let p = sphere.sample(&mut r);
            pts.push(p);
            pts.push([-p[0], -p[1], -p[2]]);
        }
        pts.truncate(n);
        return pts;
    }
    let parts = surfaces(kind, &mut r);
    let total: f64 = parts.iter().map(Surface::area).sum();
    (0..n)
        .map(|_| {
            let mut pick = r.random::<f64>() * total;
            let mut chosen = &parts[parts.len() - 1];
            for p in &parts {
                let a = p.area();
                if pick < a {
                    chosen = p;
                    break;
                }
                pick -= a;
            }
            chosen.sample(&mut r)
        })
        .collect()
}

/// Samples `n` points on the surface of a procedural shape and normalizes
/// them to the unit sphere.
pub fn generate_primitive(kind: ShapeKind, n: usize, seed: u64) -> Result<PointCloud> {
    if n < 64 {
        return Err(Error::invalid(format!("need at least 64 points, got {n}")));
    }
    normalize_unit_sphere(&PointCloud::new(sample_surface_points(kind, n, seed))?)
}
