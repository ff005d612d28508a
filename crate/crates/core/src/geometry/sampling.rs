use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{squared_distance, sub, Point3, PointCloud};
use crate::{Error, Result};

/// Farthest point sampling. The first index is `seed mod N`; every later pick
/// maximises the distance to the chosen set, ties going to the smaller index.
pub fn farthest_point_sample(cloud: &PointCloud, k: usize, seed: u64) -> Result<Vec<usize>> {
    let pts = cloud.points();
    let n = pts.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot sample {k} of {n} points")));
    }
    let start = (seed % n as u64) as usize;
    let mut chosen = Vec::with_capacity(k);
    chosen.push(start);
    let mut min_dist: Vec<f64> = pts.iter().map(|&p| squared_distance(p, pts[start])).collect();
    while chosen.len() < k {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > best_d {
                best = i;
                best_d = d;
            }
        }
        chosen.push(best);
        let c = pts[best];
        for (d, &p) in min_dist.iter_mut().zip(pts) {
            let nd = squared_distance(p, c);
            if nd < *d {
                *d = nd;
            }
        }
        // a picked point must never be picked again, even among duplicates
        min_dist[best] = f64::NEG_INFINITY;
    }
    Ok(chosen)
}

/// `k` nearest neighbours of `center` among `pts`, ordered by distance with
/// ties broken by index.
fn k_nearest(pts: &[Point3], center: Point3, k: usize) -> Vec<usize> {
    let mut order: Vec<(f64, usize)> = pts.iter().enumerate().map(|(i, &p)| (squared_distance(p, center), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < order.len() {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    order.into_iter().map(|(_, i)| i).collect()
}

fn lexicographic(a: &Point3, b: &Point3) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2]))
}

/// Patch centres and their k-nearest-neighbour groups, in canonical
/// (lexicographic-by-centre) order.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub center_indices: Vec<usize>,
    pub centers: Vec<Point3>,
    /// Indices into the parent cloud, `k` per patch.
    pub groups: Vec<Vec<usize>>,
    pub k: usize,
}

impl PatchSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Resolves the groups against the parent cloud.
    pub fn materialize(&self, cloud: &PointCloud) -> Patches {
        let pts = cloud.points();
        let points = self.groups.iter().flat_map(|g| g.iter().map(|&i| pts[i])).collect();
        Patches { centers: self.centers.clone(), points, k: self.k }
    }
}

/// Groups `k` nearest neighbours around each centre and sorts the patches
/// into canonical order. Equal centres fall back to centre index.
pub fn knn_group(cloud: &PointCloud, center_indices: &[usize], k: usize) -> Result<PatchSet> {
    let pts = cloud.points();
    if k == 0 || k > pts.len() {
        return Err(Error::invalid(format!("cannot group {k} of {} points", pts.len())));
    }
    if let Some(&bad) = center_indices.iter().find(|&&i| i >= pts.len()) {
        return Err(Error::invalid(format!("centre index {bad} out of range")));
    }
    let mut order: Vec<usize> = center_indices.to_vec();
    order.sort_by(|&a, &b| lexicographic(&pts[a], &pts[b]).then(a.cmp(&b)));
    let groups = order.iter().map(|&c| k_nearest(pts, pts[c], k)).collect();
    Ok(PatchSet { centers: order.iter().map(|&c| pts[c]).collect(), center_indices: order, groups, k })
}

/// Patch point sets in absolute coordinates, flattened `M * k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Patches {
    pub centers: Vec<Point3>,
    pub points: Vec<Point3>,
    pub k: usize,
}

impl Patches {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn patch(&self, m: usize) -> &[Point3] {
        &self.points[m * self.k..(m + 1) * self.k]
    }

    /// Points relative to their patch centre.
    pub fn local(&self, m: usize) -> impl Iterator<Item = Point3> + '_ {
        let c = self.centers[m];
        self.patch(m).iter().map(move |&p| sub(p, c))
    }
}

/// Groups `cloud` around externally supplied centres (kept in the given
/// order). Used to cut a target cloud into patches that line up with the
/// patches of its input.
pub fn group_around(cloud: &PointCloud, centers: &[Point3], k: usize) -> Result<Patches> {
    let pts = cloud.points();
    if k == 0 || k > pts.len() {
        return Err(Error::invalid(format!("cannot group {k} of {} points", pts.len())));
    }
    let points = centers.iter().flat_map(|&c| k_nearest(pts, c, k).into_iter().map(|i| pts[i])).collect();
    Ok(Patches { centers: centers.to_vec(), points, k })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn cloud(p: Vec<Point3>) -> PointCloud {
        PointCloud::new(p).unwrap()
    }

    fn line(xs: &[f64]) -> PointCloud {
        cloud(xs.iter().map(|&x| [x, 0.0, 0.0]).collect())
    }

    #[test]
    fn fps_brute_force_pair() {
        // brute force: with 0 fixed, the partner maximising distance is index 2
        let c = cloud(vec![[0.0, 0.0, 0.0], [0.1, 0.0, 0.0], [5.0, 0.0, 0.0]]);
        assert_eq!(farthest_point_sample(&c, 2, 0).unwrap(), vec![0, 2]);
        assert_eq!(farthest_point_sample(&c, 1, 4).unwrap(), vec![1]);
    }

    #[test]
    fn fps_full_sample_is_a_permutation() {
        let c = line(&[0.0, 3.0, 1.0, 7.0, 2.0]);
        let mut idx = farthest_point_sample(&c, 5, 2).unwrap();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn fps_rejects_oversampling() {
        assert!(farthest_point_sample(&line(&[0.0, 1.0]), 3, 0).is_err());
    }

    #[test]
    fn knn_collinear_example() {
        let c = line(&[0.0, 1.0, 2.0, 10.0]);
        let ps = knn_group(&c, &[0], 2).unwrap();
        assert_eq!(ps.groups, vec![vec![0, 1]]);
    }

    #[test]
    fn knn_k1_is_the_centre() {
        let c = line(&[0.0, 1.0, 2.0, 10.0]);
        let ps = knn_group(&c, &[3, 1], 1).unwrap();
        assert_eq!(ps.groups, vec![vec![1], vec![3]]);
        assert_eq!(ps.centers, vec![[1.0, 0.0, 0.0], [10.0, 0.0, 0.0]]);
    }

    #[test]
    fn knn_duplicate_tie_prefers_lower_index() {
        let c = cloud(vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let ps = knn_group(&c, &[0], 2).unwrap();
        assert_eq!(ps.groups[0], vec![0, 1]);
        assert!(knn_group(&c, &[0], 4).is_err());
    }

    #[test]
    fn group_around_keeps_centre_order() {
        let c = line(&[0.0, 1.0, 2.0, 10.0]);
        let p = group_around(&c, &[[9.0, 0.0, 0.0], [0.2, 0.0, 0.0]], 2).unwrap();
        assert_eq!(p.patch(0), &[[10.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert_eq!(p.patch(1), &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
    }

    proptest::proptest! {
        #[test]
        fn fps_ignores_appended_duplicates(
            pts in proptest::collection::vec(proptest::array::uniform3(-1.0f64..1.0), 4..40),
            k in 1usize..4,
            seed in 0u64..4,
        ) {
            let base = cloud(pts.clone());
            let picked = farthest_point_sample(&base, k, seed).unwrap();
            let mut extended = pts.clone();
            for &i in &picked {
                extended.push(pts[i]);
            }
            let again = farthest_point_sample(&cloud(extended), k, seed).unwrap();
            proptest::prop_assert_eq!(picked, again);
        }

        #[test]
        fn patch_sets_are_canonical(
            pts in proptest::collection::vec(proptest::array::uniform3(-1.0f64..1.0), 16..64),
            m in 1usize..8,
            k in 1usize..8,
        ) {
            let c = cloud(pts);
            let centers = farthest_point_sample(&c, m, 0).unwrap();
            let ps = knn_group(&c, &centers, k).unwrap();
            proptest::prop_assert_eq!(ps.len(), m);
            for (g, &ci) in ps.groups.iter().zip(&ps.center_indices) {
                proptest::prop_assert_eq!(g.len(), k);
                // the centre is at distance zero so it leads its own group
                proptest::prop_assert_eq!(c.points()[g[0]], c.points()[ci]);
            }
            for w in ps.centers.windows(2) {
                proptest::prop_assert!(lexicographic(&w[0], &w[1]) != Ordering::Greater);
            }
            let mut covered: Vec<usize> = ps.groups.iter().flatten().copied().collect();
            covered.sort();
            covered.dedup();
            proptest::prop_assert!(covered.len() >= k.min(c.n_points()));
        }
    }
}
