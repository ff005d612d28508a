use alloc::vec::Vec;

use super::{squared_distance, Point3, PointCloud};
use crate::{Error, Result};

/// Nearest-neighbour assignment in both directions, as used by the Chamfer
/// loss and its gradient. Ties resolve to the smallest index.
#[derive(Debug, Clone)]
pub struct ChamferMatches {
    pub value: f64,
    /// For each point of `pred`, the index of its nearest point in `gt`.
    pub pred_to_gt: Vec<usize>,
    /// For each point of `gt`, the index of its nearest point in `pred`.
    pub gt_to_pred: Vec<usize>,
}

fn nearest(p: Point3, set: &[Point3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, &q) in set.iter().enumerate() {
        let d = squared_distance(p, q);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Mean squared nearest-neighbour distance from `pred` to `gt` plus the same
/// term from `gt` to `pred` (no square root).
pub fn chamfer_with_matches(pred: &[Point3], gt: &[Point3]) -> Result<ChamferMatches> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::invalid("chamfer distance needs two non-empty point sets"));
    }
    let mut forward = 0.0;
    let mut pred_to_gt = Vec::with_capacity(pred.len());
    for &p in pred {
        let (j, d) = nearest(p, gt);
        forward += d;
        pred_to_gt.push(j);
    }
    let mut backward = 0.0;
    let mut gt_to_pred = Vec::with_capacity(gt.len());
    for &g in gt {
        let (i, d) = nearest(g, pred);
        backward += d;
        gt_to_pred.push(i);
    }
    Ok(ChamferMatches {
        value: forward / pred.len() as f64 + backward / gt.len() as f64,
        pred_to_gt,
        gt_to_pred,
    })
}

pub fn chamfer_points(pred: &[Point3], gt: &[Point3]) -> Result<f64> {
    chamfer_with_matches(pred, gt).map(|m| m.value)
}

pub fn chamfer_distance(p: &PointCloud, g: &PointCloud) -> Result<f64> {
    chamfer_points(p.points(), g.points())
}
