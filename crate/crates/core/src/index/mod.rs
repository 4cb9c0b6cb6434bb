//! The two-level hash: 24 blocks per OBB, `div` slices per block.
//!
//! The LRF splits the box into 8 octants. Each octant splits into three
//! pyramids that share the diagonal from the center to the octant's box
//! vertex; block `b` holds the points whose normalized coordinate along
//! axis `b` is the smallest, and is sliced perpendicular to that axis.

mod adjacency;
mod bins;

use std::sync::Arc;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{BoxMode, ObbFrame, PointCloud, PointId};

pub use adjacency::compute_adjacency;
pub use bins::{bin_geometry, BinGeometry, Plane};

/// Number of first-level blocks.
pub const BLOCKS: u32 = 24;

/// Two-level hash address: `block` in 1..=24, `proj` in 1..=div.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinIndex {
    pub block: u32,
    pub proj: u32,
}

impl BinIndex {
    pub const fn new(block: u32, proj: u32) -> Self {
        Self { block, proj }
    }

    pub fn in_range(self, div: u32) -> bool {
        (1..=BLOCKS).contains(&self.block) && (1..=div).contains(&self.proj)
    }

    /// Dense position in `0..24·div`.
    #[inline]
    pub fn flat(self, div: u32) -> usize {
        ((self.block - 1) * div + (self.proj - 1)) as usize
    }

    #[inline]
    pub fn from_flat(i: usize, div: u32) -> Self {
        let i = i as u32;
        Self {
            block: i / div + 1,
            proj: i % div + 1,
        }
    }

    /// Octant, 0..8.
    pub fn quadrant(self) -> u8 {
        ((self.block - 1) / 3) as u8
    }

    /// Sub-block within the octant, 1..=3; also the slicing axis + 1.
    pub fn sub_block(self) -> u8 {
        ((self.block - 1) % 3 + 1) as u8
    }
}

/// Target points per bin by cloud size.
pub fn default_p_avg(m: usize) -> u32 {
    match m {
        0..5_000 => 15,
        5_000..10_000 => 39,
        10_000..100_000 => 48,
        100_000..200_000 => 95,
        _ => 381,
    }
}

/// Slices per block, `⌈m / (24·p_avg)⌉` floored at 1. Returns `(div, p_avg)`.
pub fn select_div(m: usize, p_avg_override: Option<u32>) -> (u32, u32) {
    let p_avg = p_avg_override.unwrap_or_else(|| default_p_avg(m)).max(1);
    let per_slice = BLOCKS as u64 * p_avg as u64;
    let div = (m as u64).div_ceil(per_slice).max(1);
    (div.min(u32::MAX as u64) as u32, p_avg)
}

/// Octant of an LRF point and the box vertex of that octant. A zero
/// coordinate counts as non-negative.
pub fn quadrant_of(p: &Vector3<f64>, half_extents: &Vector3<f64>) -> (u8, Vector3<f64>) {
    let mut q = 0u8;
    let mut v = *half_extents;
    for axis in 0..3 {
        if p[axis] < 0.0 {
            q |= 1 << axis;
            v[axis] = -v[axis];
        }
    }
    (q, v)
}

/// Sub-block 1..=3 of an LRF point.
///
/// The three-case rule is evaluated on the point reflected into the
/// positive octant (absolute coordinates against the absolute vertex), so
/// every octant is split into the same three pyramids. Ties follow the
/// strict / non-strict inequalities of the rule.
pub fn sub_block(p: &Vector3<f64>, v_qua: &Vector3<f64>) -> u8 {
    let (x, y, z) = (p.x.abs(), p.y.abs(), p.z.abs());
    let (xq, yq, zq) = (v_qua.x.abs(), v_qua.y.abs(), v_qua.z.abs());
    let e_xy = -(yq / xq) * x + y;
    let e_xz = -(zq / xq) * x + z;
    let e_yz = -(zq / yq) * y + z;
    if e_xy > 0.0 && e_xz > 0.0 {
        1
    } else if e_xy <= 0.0 && e_yz > 0.0 {
        2
    } else {
        3
    }
}

/// First-level block, `3·p_qua + b`, in 1..=24.
pub fn block_of(p: &Vector3<f64>, p_qua: u8, v_qua: &Vector3<f64>) -> u32 {
    3 * p_qua as u32 + sub_block(p, v_qua) as u32
}

/// Second-level slice: `div − ⌊|c|·div / len_c⌋` clamped to `1..=div`,
/// where `c` is the coordinate along the sub-block's axis.
pub fn proj_of(p: &Vector3<f64>, b: u8, half_extents: &Vector3<f64>, div: u32) -> u32 {
    let axis = (b - 1) as usize;
    let steps = (p[axis].abs() * div as f64 / half_extents[axis]).floor();
    let raw = div as f64 - steps;
    raw.clamp(1.0, div as f64) as u32
}

/// Hash of a point already expressed in the LRF.
pub fn hash_lrf(p: &Vector3<f64>, half_extents: &Vector3<f64>, div: u32) -> BinIndex {
    let (q, v) = quadrant_of(p, half_extents);
    let b = sub_block(p, &v);
    BinIndex {
        block: 3 * q as u32 + b as u32,
        proj: proj_of(p, b, half_extents, div),
    }
}

/// Hash of a point in original coordinates.
pub fn hash_point(frame: &ObbFrame, div: u32, p: &Point3<f64>) -> BinIndex {
    hash_lrf(&frame.to_lrf(p), &frame.half_extents, div)
}

/// A built two-level hash over a point cloud.
///
/// Bins are stored densely by [`BinIndex::flat`]; each bin's ids are in
/// ascending order.
#[derive(Debug, Clone)]
pub struct HashIndex {
    cloud: Arc<PointCloud>,
    frame: ObbFrame,
    mode: BoxMode,
    div: u32,
    p_avg: u32,
    offsets: Vec<u32>,
    members: Vec<PointId>,
    geometry: Vec<BinGeometry>,
    adjacency: Vec<Vec<u32>>,
}

impl HashIndex {
    /// Fits the frame, picks `div` from the cloud size and hashes every point.
    pub fn build(cloud: impl Into<Arc<PointCloud>>, mode: BoxMode, p_avg_override: Option<u32>) -> Result<Self> {
        let cloud = cloud.into();
        if p_avg_override == Some(0) {
            return Err(Error::InvalidParameter("p_avg must be positive".into()));
        }
        let (div, p_avg) = select_div(cloud.len(), p_avg_override);
        Self::assemble(cloud, mode, div, p_avg)
    }

    /// Builds with an explicit slice count.
    pub fn build_with_div(cloud: impl Into<Arc<PointCloud>>, mode: BoxMode, div: u32) -> Result<Self> {
        if div == 0 {
            return Err(Error::InvalidParameter("div must be positive".into()));
        }
        let cloud = cloud.into();
        let p_avg = (cloud.len() as u64).div_ceil(BLOCKS as u64 * div as u64).max(1) as u32;
        Self::assemble(cloud, mode, div, p_avg)
    }

    fn assemble(cloud: Arc<PointCloud>, mode: BoxMode, div: u32, p_avg: u32) -> Result<Self> {
        let frame = ObbFrame::fit(cloud.points(), mode)?;
        let n_bins = (BLOCKS * div) as usize;

        let assignment: Vec<u32> = cloud
            .points()
            .iter()
            .map(|p| hash_point(&frame, div, p).flat(div) as u32)
            .collect();
        let mut offsets = vec![0u32; n_bins + 1];
        for &b in &assignment {
            offsets[b as usize + 1] += 1;
        }
        for i in 0..n_bins {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut members = vec![0 as PointId; cloud.len()];
        for (id, &b) in assignment.iter().enumerate() {
            let slot = &mut cursor[b as usize];
            members[*slot as usize] = id as PointId;
            *slot += 1;
        }

        let geometry: Vec<BinGeometry> = (0..n_bins)
            .map(|i| bins::geometry_unchecked(&frame.half_extents, div, BinIndex::from_flat(i, div)))
            .collect();
        let adjacency = compute_adjacency(&geometry, ADJACENCY_EPS * frame.diagonal());

        Ok(Self {
            cloud,
            frame,
            mode,
            div,
            p_avg,
            offsets,
            members,
            geometry,
            adjacency,
        })
    }

    pub fn cloud(&self) -> &Arc<PointCloud> {
        &self.cloud
    }

    pub fn frame(&self) -> &ObbFrame {
        &self.frame
    }

    pub fn mode(&self) -> BoxMode {
        self.mode
    }

    pub fn div(&self) -> u32 {
        self.div
    }

    pub fn p_avg(&self) -> u32 {
        self.p_avg
    }

    pub fn bin_count(&self) -> usize {
        self.geometry.len()
    }

    /// Point ids hashed into `bin` (second-level table).
    pub fn bin_points(&self, bin: BinIndex) -> Result<&[PointId]> {
        self.check(bin)?;
        Ok(self.members_flat(bin.flat(self.div)))
    }

    #[inline]
    pub(crate) fn members_flat(&self, flat: usize) -> &[PointId] {
        &self.members[self.offsets[flat] as usize..self.offsets[flat + 1] as usize]
    }

    /// The `div` bins of one block (first-level table).
    pub fn block_bins(&self, block: u32) -> impl Iterator<Item = BinIndex> + '_ {
        (1..=self.div).map(move |proj| BinIndex::new(block, proj))
    }

    pub fn geometry(&self, bin: BinIndex) -> Result<&BinGeometry> {
        self.check(bin)?;
        Ok(&self.geometry[bin.flat(self.div)])
    }

    #[inline]
    pub(crate) fn geometry_flat(&self, flat: usize) -> &BinGeometry {
        &self.geometry[flat]
    }

    pub fn neighbors(&self, bin: BinIndex) -> Result<impl Iterator<Item = BinIndex> + '_> {
        self.check(bin)?;
        let div = self.div;
        Ok(self.adjacency[bin.flat(div)]
            .iter()
            .map(move |&f| BinIndex::from_flat(f as usize, div)))
    }

    #[inline]
    pub(crate) fn neighbors_flat(&self, flat: usize) -> &[u32] {
        &self.adjacency[flat]
    }

    /// Bin of an original-coordinates point.
    pub fn hash(&self, p: &Point3<f64>) -> BinIndex {
        hash_point(&self.frame, self.div, p)
    }

    /// Structural pointers: one per bin plus one per point.
    pub fn pointer_count(&self) -> u64 {
        Self::pointer_count_for(self.cloud.len(), self.div)
    }

    pub fn pointer_count_for(m: usize, div: u32) -> u64 {
        BLOCKS as u64 * div as u64 + m as u64
    }

    fn check(&self, bin: BinIndex) -> Result<()> {
        if bin.in_range(self.div) {
            Ok(())
        } else {
            Err(Error::BinOutOfRange(bin, self.div))
        }
    }
}

/// Contact tolerance for adjacency, relative to the box diagonal.
pub const ADJACENCY_EPS: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Rotation3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_frame() -> ObbFrame {
        ObbFrame {
            center: Point3::origin(),
            rotation: Matrix3::identity(),
            half_extents: Vector3::repeat(1.0),
        }
    }

    #[test]
    fn select_div_examples() {
        assert_eq!(select_div(9_360, Some(39)), (10, 39));
        assert_eq!(select_div(1, None), (1, 15));
        assert_eq!(select_div(13_037, None), (12, 48));
        assert_eq!(select_div(200_000, Some(95)).0, 88);
    }

    #[test]
    fn p_avg_buckets() {
        assert_eq!(default_p_avg(4_999), 15);
        assert_eq!(default_p_avg(5_000), 39);
        assert_eq!(default_p_avg(10_000), 48);
        assert_eq!(default_p_avg(100_000), 95);
        assert_eq!(default_p_avg(200_000), 381);
    }

    #[test]
    fn quadrant_examples() {
        let h = Vector3::repeat(1.0);
        assert_eq!(
            quadrant_of(&Vector3::new(0.1, 0.2, 0.3), &h),
            (0, Vector3::new(1.0, 1.0, 1.0))
        );
        assert_eq!(
            quadrant_of(&Vector3::new(-0.1, 0.2, -0.3), &h),
            (5, Vector3::new(-1.0, 1.0, -1.0))
        );
        assert_eq!(quadrant_of(&Vector3::zeros(), &h).0, 0);
    }

    #[test]
    fn block_examples() {
        let v = Vector3::repeat(1.0);
        assert_eq!(block_of(&Vector3::new(0.1, 0.9, 0.9), 0, &v), 1);
        assert_eq!(block_of(&Vector3::new(0.9, 0.1, 0.05), 0, &v), 3);
        // on the x = y diagonal plane with z large: strict test fails, ≤ holds
        assert_eq!(block_of(&Vector3::new(0.4, 0.4, 0.9), 0, &v), 2);
    }

    #[test]
    fn block_rule_is_mirror_symmetric() {
        let h = Vector3::new(2.0, 1.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let p = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.5..0.5),
            );
            let (q, v) = quadrant_of(&p, &h);
            let (_, v0) = quadrant_of(&p.abs(), &h);
            assert_eq!(block_of(&p, q, &v) - 3 * q as u32, block_of(&p.abs(), 0, &v0));
        }
    }

    #[test]
    fn proj_examples() {
        let h = Vector3::repeat(2.0);
        assert_eq!(proj_of(&Vector3::new(0.0, 0.0, 0.0), 1, &h, 5), 5);
        assert_eq!(proj_of(&Vector3::new(2.0, 0.0, 0.0), 1, &h, 5), 1);
        assert_eq!(proj_of(&Vector3::new(0.0, -1.1, 0.0), 2, &h, 5), 3);
        // exterior points clamp to the outer slice
        assert_eq!(proj_of(&Vector3::new(0.0, 0.0, 9.0), 3, &h, 5), 1);
    }

    #[test]
    fn center_hashes_to_innermost_bin() {
        let f = unit_frame();
        let b = hash_point(&f, 7, &f.center);
        assert_eq!(b.quadrant(), 0);
        assert_eq!(b.proj, 7);
    }

    #[test]
    fn totality_over_grid() {
        let f = ObbFrame {
            half_extents: Vector3::new(3.0, 2.0, 1.0),
            ..unit_frame()
        };
        let div = 6;
        let n = 50;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let t = |s: usize, l: f64| -l + 2.0 * l * s as f64 / (n - 1) as f64;
                    let p = Point3::new(t(i, 3.0), t(j, 2.0), t(k, 1.0));
                    assert!(hash_point(&f, div, &p).in_range(div));
                }
            }
        }
    }

    #[test]
    fn build_small_clouds() {
        let one = PointCloud::from_coords([[1.0, 2.0, 3.0]]).unwrap();
        let idx = HashIndex::build(one, BoxMode::Obb, None).unwrap();
        assert_eq!(idx.div(), 1);
        assert_eq!(idx.bin_count(), 24);
        let occupied = (0..idx.bin_count())
            .filter(|&i| !idx.members_flat(i).is_empty())
            .count();
        assert_eq!(occupied, 1);
    }

    #[test]
    fn bin_lookup_rejects_out_of_range() {
        let cloud = PointCloud::from_coords([[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]).unwrap();
        let idx = HashIndex::build(cloud, BoxMode::Aabb, None).unwrap();
        assert!(matches!(
            idx.bin_points(BinIndex::new(25, 1)),
            Err(Error::BinOutOfRange(..))
        ));
        assert!(matches!(
            idx.geometry(BinIndex::new(1, 2)),
            Err(Error::BinOutOfRange(..))
        ));
        assert!(matches!(
            HashIndex::build_with_div(idx.cloud().clone(), BoxMode::Obb, 0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn occupancy_near_p_avg() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (div, p_avg) = (5u32, 39u32);
        let m = (24 * div * p_avg) as usize;
        let rot = Rotation3::from_euler_angles(0.3, -0.2, 1.1);
        let pts: Vec<[f64; 3]> = (0..m)
            .map(|_| {
                let p = Vector3::new(
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                );
                (rot * p).into()
            })
            .collect();
        let idx = HashIndex::build(PointCloud::from_coords(pts).unwrap(), BoxMode::Obb, Some(p_avg)).unwrap();
        assert_eq!(idx.div(), div);
        let mean = m as f64 / idx.bin_count() as f64;
        assert!(mean > p_avg as f64 / 4.0 && mean < p_avg as f64 * 4.0);
        let total: usize = (0..idx.bin_count()).map(|i| idx.members_flat(i).len()).sum();
        assert_eq!(total, m);
    }
}
