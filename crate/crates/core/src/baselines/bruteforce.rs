use std::sync::Arc;

use nalgebra::Point3;

use super::NeighborStructure;
use crate::error::Result;
use crate::geometry::{PointCloud, PointId};
use crate::query::{check_k, check_r, dist2, Hit, QueryResult, SearchStats};

/// Exhaustive scan; the ground truth for every exactness check.
pub fn bruteforce_knn(cloud: &PointCloud, q: &Point3<f64>, k: usize) -> Result<QueryResult> {
    check_k(k)?;
    let mut hits = all_hits(cloud, q);
    if k < hits.len() {
        hits.select_nth_unstable(k - 1);
        hits.truncate(k);
    }
    Ok(QueryResult::from_unsorted(hits))
}

pub fn bruteforce_radius(cloud: &PointCloud, q: &Point3<f64>, r: f64) -> Result<QueryResult> {
    check_r(r)?;
    let r2 = r * r;
    let mut hits = all_hits(cloud, q);
    hits.retain(|h| h.dist2 < r2);
    Ok(QueryResult::from_unsorted(hits))
}

fn all_hits(cloud: &PointCloud, q: &Point3<f64>) -> Vec<Hit> {
    cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| Hit {
            id: i as PointId,
            dist2: dist2(p, q),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BruteForce {
    cloud: Arc<PointCloud>,
}

impl BruteForce {
    pub fn new(cloud: impl Into<Arc<PointCloud>>) -> Self {
        Self { cloud: cloud.into() }
    }

    fn stats(&self) -> SearchStats {
        SearchStats {
            visited: 1,
            distance_evals: self.cloud.len(),
        }
    }
}

impl NeighborStructure for BruteForce {
    fn name(&self) -> &'static str {
        "bruteforce"
    }

    fn pointer_count(&self) -> u64 {
        self.cloud.len() as u64
    }

    fn knn_stats(&self, q: &Point3<f64>, k: usize) -> Result<(QueryResult, SearchStats)> {
        Ok((bruteforce_knn(&self.cloud, q, k)?, self.stats()))
    }

    fn radius_stats(&self, q: &Point3<f64>, r: f64) -> Result<(QueryResult, SearchStats)> {
        Ok((bruteforce_radius(&self.cloud, q, r)?, self.stats()))
    }
}
