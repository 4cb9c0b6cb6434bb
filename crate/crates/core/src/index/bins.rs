use nalgebra::Vector3;

use super::BinIndex;
use crate::error::{Error, Result};
use crate::geometry::ObbFrame;

/// A bounding plane in LRF coordinates. The normal points out of the bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    point: Vector3<f64>,
    normal: Vector3<f64>,
    unit: Vector3<f64>,
    offset: f64,
}

impl Plane {
    pub fn new(point: Vector3<f64>, normal: Vector3<f64>) -> Self {
        let unit = normal.normalize();
        Self {
            point,
            normal,
            unit,
            offset: unit.dot(&point),
        }
    }

    pub fn point(&self) -> &Vector3<f64> {
        &self.point
    }

    pub fn normal(&self) -> &Vector3<f64> {
        &self.normal
    }

    /// Positive outside, negative inside.
    #[inline]
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        self.unit.dot(p) - self.offset
    }

    /// `|(p_pla − q)·n| / ‖n‖`.
    #[inline]
    pub fn distance(&self, q: &Vector3<f64>) -> f64 {
        self.signed_distance(q).abs()
    }
}

/// Convex region of one bin in the LRF.
#[derive(Debug, Clone, PartialEq)]
pub struct BinGeometry {
    pub bin: BinIndex,
    pub planes: Vec<Plane>,
    pub vertices: Vec<Vector3<f64>>,
}

impl BinGeometry {
    /// Inside or within `eps` of every plane.
    pub fn contains(&self, p: &Vector3<f64>, eps: f64) -> bool {
        self.planes.iter().all(|pl| pl.signed_distance(p) <= eps)
    }

    /// Smallest plane distance from `q`; see [`crate::query::min_dist_boun`].
    #[inline]
    pub fn min_plane_distance(&self, q: &Vector3<f64>) -> f64 {
        self.planes
            .iter()
            .map(|pl| pl.distance(q))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Planes and vertices bounding `bin`.
///
/// With `u_i = |c_i| / len_i` in the bin's octant and `a` the slicing axis,
/// the region is `lo ≤ u_a ≤ hi`, `u_a ≤ u_o ≤ 1` for both other axes.
/// The outer slice (proj = 1) has `hi = 1`, which the other constraints
/// already imply, so it is bounded by 5 planes; every other slice by 6.
pub fn bin_geometry(frame: &ObbFrame, div: u32, bin: BinIndex) -> Result<BinGeometry> {
    if !bin.in_range(div) {
        return Err(Error::BinOutOfRange(bin, div));
    }
    Ok(geometry_unchecked(&frame.half_extents, div, bin))
}

pub(super) fn geometry_unchecked(half: &Vector3<f64>, div: u32, bin: BinIndex) -> BinGeometry {
    let q = bin.quadrant();
    let a = (bin.sub_block() - 1) as usize;
    let others = [(a + 1) % 3, (a + 2) % 3];
    let sign: [f64; 3] = std::array::from_fn(|i| if q & (1 << i) != 0 { -1.0 } else { 1.0 });
    let axis = |i: usize| Vector3::ith(i, 1.0);

    let lo = (div - bin.proj) as f64 / div as f64;
    let hi = (div - bin.proj + 1) as f64 / div as f64;

    let mut planes = Vec::with_capacity(6);
    planes.push(Plane::new(axis(a) * (sign[a] * lo * half[a]), axis(a) * -sign[a]));
    if bin.proj != 1 {
        planes.push(Plane::new(axis(a) * (sign[a] * hi * half[a]), axis(a) * sign[a]));
    }
    for &o in &others {
        let n = axis(a) * (sign[a] / half[a]) - axis(o) * (sign[o] / half[o]);
        planes.push(Plane::new(Vector3::zeros(), n));
    }
    for &o in &others {
        planes.push(Plane::new(axis(o) * (sign[o] * half[o]), axis(o) * sign[o]));
    }

    // corners in normalized octant coordinates
    let mut corners: Vec<[f64; 3]> = Vec::with_capacity(8);
    for ua in [lo, hi] {
        for u1 in [ua, 1.0] {
            for u2 in [ua, 1.0] {
                let mut u = [0.0; 3];
                u[a] = ua;
                u[others[0]] = u1;
                u[others[1]] = u2;
                if !corners.contains(&u) {
                    corners.push(u);
                }
            }
        }
    }
    let vertices = corners
        .iter()
        .map(|u| Vector3::from_fn(|i, _| sign[i] * u[i] * half[i]))
        .collect();

    BinGeometry { bin, planes, vertices }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Point3};

    fn frame(h: Vector3<f64>) -> ObbFrame {
        ObbFrame {
            center: Point3::origin(),
            rotation: Matrix3::identity(),
            half_extents: h,
        }
    }

    /// Independent vertex oracle: every triple of planes that meets in a
    /// single point lying inside all planes.
    fn triple_intersections(g: &BinGeometry) -> Vec<Vector3<f64>> {
        let mut out: Vec<Vector3<f64>> = Vec::new();
        let n = g.planes.len();
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    let ps = [&g.planes[i], &g.planes[j], &g.planes[k]];
                    let m = Matrix3::from_rows(&[
                        ps[0].normal().transpose(),
                        ps[1].normal().transpose(),
                        ps[2].normal().transpose(),
                    ]);
                    let rhs = Vector3::from_fn(|r, _| ps[r].normal().dot(ps[r].point()));
                    let Some(inv) = m.try_inverse() else { continue };
                    if m.determinant().abs() < 1e-12 {
                        continue;
                    }
                    let x = inv * rhs;
                    if g.contains(&x, 1e-9) && !out.iter().any(|v| (v - x).norm() < 1e-9) {
                        out.push(x);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn full_pyramid_at_div_one() {
        let f = frame(Vector3::repeat(1.0));
        for block in 1..=24 {
            let g = bin_geometry(&f, 1, BinIndex::new(block, 1)).unwrap();
            assert_eq!(g.planes.len(), 5);
            assert_eq!(g.vertices.len(), 5);
            assert!(g.vertices.iter().any(|v| v.norm() == 0.0));
        }
    }

    #[test]
    fn plane_counts_by_slice() {
        let f = frame(Vector3::new(3.0, 2.0, 1.0));
        for block in 1..=24 {
            for proj in 1..=5 {
                let g = bin_geometry(&f, 5, BinIndex::new(block, proj)).unwrap();
                let expected = if proj == 1 { 5 } else { 6 };
                assert_eq!(g.planes.len(), expected);
                assert!(g.planes.iter().all(|p| p.normal().norm() > 0.0));
            }
        }
    }

    #[test]
    fn innermost_bin_touches_origin() {
        let f = frame(Vector3::new(3.0, 2.0, 1.0));
        let g = bin_geometry(&f, 4, BinIndex::new(1, 4)).unwrap();
        assert!(g.vertices.iter().any(|v| v.norm() == 0.0));
    }

    #[test]
    fn vertices_match_triple_plane_intersections() {
        let f = frame(Vector3::new(3.0, 2.0, 1.0));
        for block in 1..=24 {
            for proj in 1..=4 {
                let g = bin_geometry(&f, 4, BinIndex::new(block, proj)).unwrap();
                let oracle = triple_intersections(&g);
                assert_eq!(oracle.len(), g.vertices.len(), "bin ({block},{proj})");
                for v in &g.vertices {
                    assert!(oracle.iter().any(|o| (o - v).norm() < 1e-9));
                }
            }
        }
    }

    #[test]
    fn out_of_range_bin() {
        let f = frame(Vector3::repeat(1.0));
        assert!(matches!(
            bin_geometry(&f, 3, BinIndex::new(0, 1)),
            Err(Error::BinOutOfRange(..))
        ));
        assert!(matches!(
            bin_geometry(&f, 3, BinIndex::new(3, 4)),
            Err(Error::BinOutOfRange(..))
        ));
    }
}
