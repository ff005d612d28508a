//! Plain-text point clouds: one `x y z` line per point.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dgpic_core::geometry::{Point3, PointCloud};

use crate::error::{DgpicError, Result};

/// Serializes with shortest round-trip decimal formatting.
pub fn to_string(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(cloud.n_points() * 64);
    for p in cloud.points() {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    s
}

pub fn parse(text: &str, path: &Path, expected: Option<usize>) -> Result<PointCloud> {
    let mut points: Vec<Point3> = Vec::with_capacity(expected.unwrap_or(1024));
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut fields = line.split(' ');
        let mut p = [0.0f64; 3];
        for v in &mut p {
            let field = fields.next().ok_or_else(|| DgpicError::parse(path, line_no, "expected three coordinates"))?;
            *v = field.parse().map_err(|e| DgpicError::parse(path, line_no, format!("bad coordinate {field:?}: {e}")))?;
            if !v.is_finite() {
                return Err(DgpicError::parse(path, line_no, "non-finite coordinate"));
            }
        }
        if fields.next().is_some() {
            return Err(DgpicError::parse(path, line_no, "more than three fields"));
        }
        points.push(p);
    }
    if let Some(n) = expected {
        if points.len() != n {
            return Err(DgpicError::parse(path, points.len() + 1, format!("expected {n} points, found {}", points.len())));
        }
    }
    Ok(PointCloud::new(points)?)
}

pub fn read(path: &Path, expected: Option<usize>) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| DgpicError::io(path, e))?;
    parse(&text, path, expected)
}

pub fn write(path: &Path, cloud: &PointCloud) -> Result<()> {
    fs::write(path, to_string(cloud)).map_err(|e| DgpicError::io(path, e))
}
