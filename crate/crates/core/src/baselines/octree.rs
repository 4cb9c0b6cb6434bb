use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use super::NeighborStructure;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, PointId};
use crate::query::{check_k, check_r, dist2, BestK, Hit, QueryResult, SearchStats};

/// Upper bound on materialized nodes, `Σ 8^{i−1}` over all layers.
pub const MAX_OCTREE_NODES: u64 = 8u64.pow(9);

/// Tree height by cloud size.
pub fn default_layer(m: usize) -> u32 {
    match m {
        0..10_000 => 4,
        10_000..100_000 => 6,
        100_000..200_000 => 7,
        _ => 8,
    }
}

/// Fixed-height octree over the cloud's axis-aligned bounds.
///
/// Every level is materialized as a dense array of per-cell point counts;
/// points live in the leaves (level `layer − 1`).
#[derive(Debug, Clone)]
pub struct Octree {
    cloud: Arc<PointCloud>,
    layer: u32,
    min: Vector3<f64>,
    size: Vector3<f64>,
    slack: f64,
    counts: Vec<Vec<u32>>,
    leaf_offsets: Vec<u32>,
    leaf_points: Vec<PointId>,
}

#[derive(Clone, Copy)]
struct Cell {
    level: u32,
    x: u32,
    y: u32,
    z: u32,
}

impl Octree {
    pub fn build(cloud: impl Into<Arc<PointCloud>>, layer: u32) -> Result<Self> {
        let cloud = cloud.into();
        if layer == 0 {
            return Err(Error::InvalidParameter("octree layer must be at least 1".into()));
        }
        if layer > 12 || Self::node_count(layer) > MAX_OCTREE_NODES {
            return Err(Error::LayerTooLarge(layer));
        }
        let (lo, hi) = cloud.bounds();
        let min = lo.coords;
        let size = hi - lo;
        let leaf_level = layer - 1;
        let res = 1u32 << leaf_level;

        let cell_of = |p: &Point3<f64>| -> [u32; 3] {
            std::array::from_fn(|i| {
                if size[i] > 0.0 {
                    let t = ((p[i] - min[i]) / size[i] * res as f64).floor();
                    t.clamp(0.0, (res - 1) as f64) as u32
                } else {
                    0
                }
            })
        };

        let mut counts: Vec<Vec<u32>> = (0..layer).map(|l| vec![0u32; 1usize << (3 * l)]).collect();
        let leaf_cells: Vec<[u32; 3]> = cloud.points().iter().map(cell_of).collect();
        for c in &leaf_cells {
            for level in 0..layer {
                let shift = leaf_level - level;
                let idx = linear(level, c[0] >> shift, c[1] >> shift, c[2] >> shift);
                counts[level as usize][idx] += 1;
            }
        }

        let leaves = &counts[leaf_level as usize];
        let mut leaf_offsets = vec![0u32; leaves.len() + 1];
        for i in 0..leaves.len() {
            leaf_offsets[i + 1] = leaf_offsets[i] + leaves[i];
        }
        let mut cursor = leaf_offsets.clone();
        let mut leaf_points = vec![0; cloud.len()];
        for (id, c) in leaf_cells.iter().enumerate() {
            let slot = &mut cursor[linear(leaf_level, c[0], c[1], c[2])];
            leaf_points[*slot as usize] = id as PointId;
            *slot += 1;
        }

        let slack = 1e-10 * size.norm().max(f64::MIN_POSITIVE);
        Ok(Self {
            cloud,
            layer,
            min,
            size,
            slack,
            counts,
            leaf_offsets,
            leaf_points,
        })
    }

    pub fn layer(&self) -> u32 {
        self.layer
    }

    /// `Σ_{i=1}^{layer} 8^{i−1}`.
    pub fn node_count(layer: u32) -> u64 {
        (0..layer)
            .map(|i| 8u64.saturating_pow(i))
            .fold(0u64, u64::saturating_add)
    }

    /// `Σ_{i=1}^{layer} 8^{i−1} + m`.
    pub fn pointer_count_for(m: usize, layer: u32) -> u64 {
        Self::node_count(layer) + m as u64
    }

    fn bounds(&self, c: Cell) -> (Vector3<f64>, Vector3<f64>) {
        let n = (1u32 << c.level) as f64;
        let idx = Vector3::new(c.x as f64, c.y as f64, c.z as f64);
        let lo = self.min + self.size.component_mul(&idx) / n;
        let hi = self.min + self.size.component_mul(&idx.add_scalar(1.0)) / n;
        (lo, hi)
    }

    fn box_dist2(&self, c: Cell, q: &Point3<f64>) -> f64 {
        let (lo, hi) = self.bounds(c);
        (0..3)
            .map(|i| {
                let d = (lo[i] - q[i]).max(q[i] - hi[i]).max(0.0);
                let d = (d - self.slack).max(0.0);
                d * d
            })
            .sum()
    }

    /// True if the ball of radius² `r2` around `q` lies strictly inside the cell.
    fn ball_inside(&self, c: Cell, q: &Point3<f64>, r2: f64) -> bool {
        let (lo, hi) = self.bounds(c);
        let r = r2.sqrt() + self.slack;
        (0..3).all(|i| q[i] - lo[i] > r && hi[i] - q[i] > r)
    }

    fn count(&self, c: Cell) -> u32 {
        self.counts[c.level as usize][linear(c.level, c.x, c.y, c.z)]
    }

    fn children(&self, c: Cell, q: &Point3<f64>) -> Vec<(f64, Cell)> {
        let mut out = Vec::with_capacity(8);
        for octant in 0..8u32 {
            let child = Cell {
                level: c.level + 1,
                x: 2 * c.x + (octant & 1),
                y: 2 * c.y + ((octant >> 1) & 1),
                z: 2 * c.z + ((octant >> 2) & 1),
            };
            if self.count(child) > 0 {
                out.push((self.box_dist2(child, q), child));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    fn leaf(&self, c: Cell) -> &[PointId] {
        let i = linear(c.level, c.x, c.y, c.z);
        &self.leaf_points[self.leaf_offsets[i] as usize..self.leaf_offsets[i + 1] as usize]
    }

    /// Returns true once the search can stop early.
    fn knn_rec(&self, c: Cell, q: &Point3<f64>, best: &mut BestK, stats: &mut SearchStats) -> bool {
        stats.visited += 1;
        if c.level + 1 == self.layer {
            let ids = self.leaf(c);
            stats.distance_evals += ids.len();
            for &id in ids {
                best.offer(Hit {
                    id,
                    dist2: dist2(&self.cloud[id], q),
                });
            }
            return false;
        }
        for (bd, child) in self.children(c, q) {
            if bd > best.worst() {
                break;
            }
            if self.knn_rec(child, q, best, stats) {
                return true;
            }
            if best.is_full() && self.ball_inside(child, q, best.worst()) {
                return true;
            }
        }
        false
    }

    fn radius_rec(&self, c: Cell, q: &Point3<f64>, r2: f64, out: &mut Vec<Hit>, stats: &mut SearchStats) {
        stats.visited += 1;
        if c.level + 1 == self.layer {
            let ids = self.leaf(c);
            stats.distance_evals += ids.len();
            for &id in ids {
                let d = dist2(&self.cloud[id], q);
                if d < r2 {
                    out.push(Hit { id, dist2: d });
                }
            }
            return;
        }
        for (bd, child) in self.children(c, q) {
            if bd >= r2 {
                break;
            }
            self.radius_rec(child, q, r2, out, stats);
        }
    }
}

const ROOT: Cell = Cell {
    level: 0,
    x: 0,
    y: 0,
    z: 0,
};

#[inline]
fn linear(level: u32, x: u32, y: u32, z: u32) -> usize {
    let n = 1usize << level;
    x as usize + n * (y as usize + n * z as usize)
}

impl NeighborStructure for Octree {
    fn name(&self) -> &'static str {
        "octree"
    }

    fn pointer_count(&self) -> u64 {
        Self::pointer_count_for(self.cloud.len(), self.layer)
    }

    fn knn_stats(&self, q: &Point3<f64>, k: usize) -> Result<(QueryResult, SearchStats)> {
        check_k(k)?;
        let mut best = BestK::new(k);
        let mut stats = SearchStats::default();
        self.knn_rec(ROOT, q, &mut best, &mut stats);
        Ok((best.into_result(), stats))
    }

    fn radius_stats(&self, q: &Point3<f64>, r: f64) -> Result<(QueryResult, SearchStats)> {
        check_r(r)?;
        let mut out = Vec::new();
        let mut stats = SearchStats::default();
        self.radius_rec(ROOT, q, r * r, &mut out, &mut stats);
        Ok((QueryResult::from_unsorted(out), stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointer_counts() {
        assert_eq!(Octree::node_count(4), 585);
        assert_eq!(Octree::pointer_count_for(5_000, 4), 5_585);
        assert_eq!(Octree::pointer_count_for(10_000, 6), 47_449);
    }

    #[test]
    fn layer_guard() {
        let cloud = Arc::new(PointCloud::from_coords([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]).unwrap());
        assert!(matches!(
            Octree::build(cloud.clone(), 10),
            Err(Error::LayerTooLarge(10))
        ));
        assert!(matches!(
            Octree::build(cloud.clone(), 0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(Octree::build(cloud, 1).is_ok());
    }

    #[test]
    fn default_layers() {
        assert_eq!(default_layer(1_000), 4);
        assert_eq!(default_layer(5_000), 4);
        assert_eq!(default_layer(10_000), 6);
        assert_eq!(default_layer(100_000), 7);
        assert_eq!(default_layer(2_500_000), 8);
    }

    #[test]
    fn counts_are_consistent() {
        let cloud = PointCloud::from_coords((0..500).map(|i| {
            let t = i as f64;
            [(t * 0.37).sin(), (t * 1.7).cos() * 4.0, 0.0]
        }))
        .unwrap();
        let tree = Octree::build(cloud, 4).unwrap();
        for level in &tree.counts {
            assert_eq!(level.iter().map(|&c| c as usize).sum::<usize>(), 500);
        }
    }
}
