//! Reference structures behind one query interface.

mod bruteforce;
mod kdtree;
mod octree;

use nalgebra::Point3;

use crate::error::Result;
use crate::geometry::BoxMode;
use crate::index::HashIndex;
use crate::query::{QueryResult, SearchOptions, SearchStats};

pub use bruteforce::{bruteforce_knn, bruteforce_radius, BruteForce};
pub use kdtree::KdTree;
pub use octree::{default_layer, Octree, MAX_OCTREE_NODES};

/// An exact neighbor structure.
pub trait NeighborStructure: Send + Sync {
    fn name(&self) -> &'static str;

    /// Structural pointers under the 4-byte pointer memory model.
    fn pointer_count(&self) -> u64;

    fn knn_stats(&self, q: &Point3<f64>, k: usize) -> Result<(QueryResult, SearchStats)>;

    fn radius_stats(&self, q: &Point3<f64>, r: f64) -> Result<(QueryResult, SearchStats)>;

    fn knn(&self, q: &Point3<f64>, k: usize) -> Result<QueryResult> {
        self.knn_stats(q, k).map(|(r, _)| r)
    }

    fn radius(&self, q: &Point3<f64>, r: f64) -> Result<QueryResult> {
        self.radius_stats(q, r).map(|(res, _)| res)
    }
}

impl NeighborStructure for HashIndex {
    fn name(&self) -> &'static str {
        match self.mode() {
            BoxMode::Obb => "2llsh",
            BoxMode::Aabb => "2llsh-aabb",
        }
    }

    fn pointer_count(&self) -> u64 {
        HashIndex::pointer_count(self)
    }

    fn knn_stats(&self, q: &Point3<f64>, k: usize) -> Result<(QueryResult, SearchStats)> {
        self.knn_with(q, k, SearchOptions::default())
    }

    fn radius_stats(&self, q: &Point3<f64>, r: f64) -> Result<(QueryResult, SearchStats)> {
        self.radius_with(q, r, SearchOptions::default())
    }
}
