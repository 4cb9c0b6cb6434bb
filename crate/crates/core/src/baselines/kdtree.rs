use std::sync::Arc;

use nalgebra::Point3;

use super::NeighborStructure;
use crate::error::Result;
use crate::geometry::{PointCloud, PointId};
use crate::query::{check_k, check_r, BestK, Hit, QueryResult, SearchStats};

/// Balanced 3-d tree, one point per node, median split with the axis
/// cycling x → y → z by depth.
///
/// Stored implicitly: the node of a range `[lo, hi)` is its middle slot,
/// its subtrees the halves on either side.
#[derive(Debug, Clone)]
pub struct KdTree {
    cloud: Arc<PointCloud>,
    ids: Vec<PointId>,
    coords: Vec<[f64; 3]>,
}

impl KdTree {
    pub fn build(cloud: impl Into<Arc<PointCloud>>) -> Self {
        let cloud = cloud.into();
        let mut ids: Vec<PointId> = (0..cloud.len() as PointId).collect();
        split(&cloud, &mut ids, 0);
        let coords = ids.iter().map(|&i| cloud[i].coords.into()).collect();
        Self { cloud, ids, coords }
    }

    pub fn cloud(&self) -> &Arc<PointCloud> {
        &self.cloud
    }

    /// Levels of the tree: ⌈log₂(m + 1)⌉.
    pub fn depth(&self) -> u32 {
        tree_depth(self.ids.len())
    }

    /// `Σ_{i=1}^{⌈log₂(m+1)⌉} 2^{i−1}`, capped at m.
    pub fn pointer_count_for(m: usize) -> u64 {
        let full = (1u64 << tree_depth(m)) - 1;
        full.min(m as u64)
    }

    fn knn_rec(&self, lo: usize, hi: usize, depth: usize, q: &[f64; 3], best: &mut BestK, stats: &mut SearchStats) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.coords[mid];
        stats.visited += 1;
        stats.distance_evals += 1;
        best.offer(Hit {
            id: self.ids[mid],
            dist2: d2(p, q),
        });
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(near.0, near.1, depth + 1, q, best, stats);
        if diff * diff <= best.worst() {
            self.knn_rec(far.0, far.1, depth + 1, q, best, stats);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn radius_rec(
        &self,
        lo: usize,
        hi: usize,
        depth: usize,
        q: &[f64; 3],
        r2: f64,
        out: &mut Vec<Hit>,
        stats: &mut SearchStats,
    ) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = &self.coords[mid];
        stats.visited += 1;
        stats.distance_evals += 1;
        let d = d2(p, q);
        if d < r2 {
            out.push(Hit {
                id: self.ids[mid],
                dist2: d,
            });
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.radius_rec(near.0, near.1, depth + 1, q, r2, out, stats);
        if diff * diff < r2 {
            self.radius_rec(far.0, far.1, depth + 1, q, r2, out, stats);
        }
    }
}

fn tree_depth(m: usize) -> u32 {
    // ⌈log₂(m + 1)⌉ = bit length of m
    usize::BITS - m.leading_zeros()
}

fn split(cloud: &PointCloud, ids: &mut [PointId], depth: usize) {
    if ids.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = ids.len() / 2;
    ids.select_nth_unstable_by(mid, |&a, &b| cloud[a][axis].total_cmp(&cloud[b][axis]).then(a.cmp(&b)));
    let (left, rest) = ids.split_at_mut(mid);
    split(cloud, left, depth + 1);
    split(cloud, &mut rest[1..], depth + 1);
}

#[inline]
fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let (x, y, z) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    x * x + y * y + z * z
}

impl NeighborStructure for KdTree {
    fn name(&self) -> &'static str {
        "kdtree"
    }

    fn pointer_count(&self) -> u64 {
        Self::pointer_count_for(self.ids.len())
    }

    fn knn_stats(&self, q: &Point3<f64>, k: usize) -> Result<(QueryResult, SearchStats)> {
        check_k(k)?;
        let mut best = BestK::new(k);
        let mut stats = SearchStats::default();
        self.knn_rec(0, self.ids.len(), 0, &q.coords.into(), &mut best, &mut stats);
        Ok((best.into_result(), stats))
    }

    fn radius_stats(&self, q: &Point3<f64>, r: f64) -> Result<(QueryResult, SearchStats)> {
        check_r(r)?;
        let mut out = Vec::new();
        let mut stats = SearchStats::default();
        self.radius_rec(0, self.ids.len(), 0, &q.coords.into(), r * r, &mut out, &mut stats);
        Ok((QueryResult::from_unsorted(out), stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_pointers() {
        let one = KdTree::build(PointCloud::from_coords([[1.0, 1.0, 1.0]]).unwrap());
        assert_eq!(one.depth(), 1);
        assert_eq!(KdTree::pointer_count_for(5_000), 5_000);
        assert_eq!(KdTree::pointer_count_for(3), 3);
        assert_eq!(KdTree::pointer_count_for(4), 4);
        assert_eq!(tree_depth(7), 3);
        assert_eq!(tree_depth(8), 4);
    }

    #[test]
    fn median_split_invariant() {
        let cloud = PointCloud::from_coords((0..100).map(|i| {
            let t = i as f64;
            [(t * 0.37).sin(), (t * 1.7).cos(), (t * 0.11).sin()]
        }))
        .unwrap();
        let tree = KdTree::build(cloud);
        fn check(t: &KdTree, lo: usize, hi: usize, depth: usize) {
            if hi - lo <= 1 {
                return;
            }
            let mid = lo + (hi - lo) / 2;
            let axis = depth % 3;
            let s = t.coords[mid][axis];
            assert!(t.coords[lo..mid].iter().all(|p| p[axis] <= s));
            assert!(t.coords[mid + 1..hi].iter().all(|p| p[axis] >= s));
            check(t, lo, mid, depth + 1);
            check(t, mid + 1, hi, depth + 1);
        }
        check(&tree, 0, 100, 0);
    }
}
