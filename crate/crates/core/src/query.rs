//! Exact kNN and radius search over a [`HashIndex`].
//!
//! The query's home bin is scanned first, then bins are expanded through
//! the adjacency graph. A neighbor bin is scanned (and its own neighbors
//! queued) only if its plane-distance bound can still beat the current
//! k-th distance, or the search radius.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, PointId};
use crate::index::{hash_lrf, BinIndex, HashIndex};

/// One result entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub id: PointId,
    /// Squared Euclidean distance to the query.
    pub dist2: f64,
}

impl Hit {
    #[inline]
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.dist2.total_cmp(&other.dist2).then(self.id.cmp(&other.id))
    }
}

impl Eq for Hit {}

impl PartialOrd for Hit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Hit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Hits ordered by ascending distance, ties by ascending id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryResult {
    pub hits: Vec<Hit>,
}

impl QueryResult {
    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    pub fn ids(&self) -> Vec<PointId> {
        self.hits.iter().map(|h| h.id).collect()
    }

    pub(crate) fn from_unsorted(mut hits: Vec<Hit>) -> Self {
        hits.sort_unstable();
        Self { hits }
    }
}

/// Work counters for one query.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Bins (or tree nodes) whose points were examined.
    pub visited: usize,
    /// Point-to-query distance evaluations.
    pub distance_evals: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    /// With pruning off the bound is treated as 0 and every reachable bin
    /// is scanned.
    pub pruning: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { pruning: true }
    }
}

/// Bounded worst-out collection of the k best hits.
pub(crate) struct BestK {
    k: usize,
    heap: BinaryHeap<Hit>,
}

impl BestK {
    pub(crate) fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub(crate) fn is_full(&self) -> bool {
        self.heap.len() >= self.k
    }

    /// Squared k-th distance, or +∞ while fewer than k hits are held.
    #[inline]
    pub(crate) fn worst(&self) -> f64 {
        if self.is_full() {
            self.heap.peek().map_or(f64::INFINITY, |h| h.dist2)
        } else {
            f64::INFINITY
        }
    }

    #[inline]
    pub(crate) fn offer(&mut self, hit: Hit) {
        if !self.is_full() {
            self.heap.push(hit);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if hit < *top {
                *top = hit;
            }
        }
    }

    pub(crate) fn into_result(self) -> QueryResult {
        QueryResult {
            hits: self.heap.into_sorted_vec(),
        }
    }
}

#[inline]
pub(crate) fn dist2(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    (a - b).norm_squared()
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::KZero)
    } else {
        Ok(())
    }
}

pub(crate) fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::RNonPositive(r))
    }
}

/// Admission slack on the plane bound, relative to the box diagonal; it
/// absorbs rounding in the LRF transform and can only widen the search.
const BOUND_SLACK: f64 = 1e-10;

/// Smallest distance from `q` to the infinite planes bounding `bin`.
///
/// For `q` outside the bin this never exceeds the distance from `q` to the
/// bin's region: the nearest region point lies on one of those planes.
pub fn min_dist_boun(q: &Point3<f64>, bin: BinIndex, index: &HashIndex) -> Result<f64> {
    let g = index.geometry(bin)?;
    Ok(g.min_plane_distance(&index.frame().to_lrf(q)))
}

impl HashIndex {
    /// Bin a query starts from: the hash of `q` clamped onto the box.
    ///
    /// Clamping keeps the home bin at the box point nearest to an exterior
    /// query, so every bin crossed on the way to a true neighbor is within
    /// the neighbor's distance.
    pub fn home_bin(&self, q: &Point3<f64>) -> BinIndex {
        let h = &self.frame().half_extents;
        let local = self.frame().to_lrf(q);
        let clamped = Vector3::from_fn(|i, _| local[i].clamp(-h[i], h[i]));
        hash_lrf(&clamped, h, self.div())
    }

    pub fn knn(&self, q: &Point3<f64>, k: usize) -> Result<QueryResult> {
        self.knn_with(q, k, SearchOptions::default()).map(|(r, _)| r)
    }

    pub fn radius(&self, q: &Point3<f64>, r: f64) -> Result<QueryResult> {
        self.radius_with(q, r, SearchOptions::default()).map(|(res, _)| res)
    }

    pub fn knn_with(&self, q: &Point3<f64>, k: usize, opts: SearchOptions) -> Result<(QueryResult, SearchStats)> {
        check_k(k)?;
        if self.cloud().is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut best = BestK::new(k);
        let stats = self.expand(q, opts, &mut best);
        Ok((best.into_result(), stats))
    }

    pub fn radius_with(&self, q: &Point3<f64>, r: f64, opts: SearchOptions) -> Result<(QueryResult, SearchStats)> {
        check_r(r)?;
        if self.cloud().is_empty() {
            return Err(Error::EmptyIndex);
        }
        let mut within = Within {
            r,
            r2: r * r,
            hits: Vec::new(),
        };
        let stats = self.expand(q, opts, &mut within);
        Ok((QueryResult::from_unsorted(within.hits), stats))
    }

    /// Frontier expansion shared by both query kinds. Each bin is
    /// considered at most once; rejected bins stay rejected because the
    /// admission threshold never grows.
    fn expand(&self, q: &Point3<f64>, opts: SearchOptions, collector: &mut impl Collector) -> SearchStats {
        let cloud = self.cloud();
        let mut stats = SearchStats::default();
        let div = self.div();
        let local = self.frame().to_lrf(q);
        let slack = BOUND_SLACK * self.frame().diagonal();

        let home = self.home_bin(q).flat(div);
        let mut visited = vec![false; self.bin_count()];
        visited[home] = true;
        collector.scan(cloud, self.members_flat(home), q, &mut stats);
        stats.visited += 1;

        let mut frontier = VecDeque::from([home]);
        while let Some(bin) = frontier.pop_front() {
            for &nb in self.neighbors_flat(bin) {
                let nb = nb as usize;
                if visited[nb] {
                    continue;
                }
                visited[nb] = true;
                let bound = if opts.pruning {
                    (self.geometry_flat(nb).min_plane_distance(&local) - slack).max(0.0)
                } else {
                    0.0
                };
                if collector.admit(bound) {
                    collector.scan(cloud, self.members_flat(nb), q, &mut stats);
                    stats.visited += 1;
                    frontier.push_back(nb);
                }
            }
        }
        stats
    }
}

/// Receives scanned points and decides which bins are worth scanning.
trait Collector {
    fn offer(&mut self, hit: Hit);

    /// Whether a bin whose plane bound is `bound` may hold a result.
    fn admit(&self, bound: f64) -> bool;

    #[inline]
    fn scan(&mut self, cloud: &PointCloud, ids: &[PointId], q: &Point3<f64>, stats: &mut SearchStats) {
        stats.distance_evals += ids.len();
        for &id in ids {
            self.offer(Hit {
                id,
                dist2: dist2(&cloud[id], q),
            });
        }
    }
}

impl Collector for BestK {
    #[inline]
    fn offer(&mut self, hit: Hit) {
        BestK::offer(self, hit);
    }

    #[inline]
    fn admit(&self, bound: f64) -> bool {
        // ≤ keeps bins holding an equal-distance point with a lower id.
        let worst = self.worst();
        worst.is_infinite() || bound * bound <= worst
    }
}

struct Within {
    r: f64,
    r2: f64,
    hits: Vec<Hit>,
}

impl Collector for Within {
    #[inline]
    fn offer(&mut self, hit: Hit) {
        if hit.dist2 < self.r2 {
            self.hits.push(hit);
        }
    }

    #[inline]
    fn admit(&self, bound: f64) -> bool {
        bound < self.r
    }
}
