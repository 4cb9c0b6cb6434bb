//! Point clouds, oriented bounding boxes and the local reference frame.
//!
//! The OBB orientation comes from the right singular vectors of the
//! mean-centered point matrix. Extents are taken from the exact per-axis
//! min/max of the rotated points, so every point is contained in the box.

use std::ops::Index;

use nalgebra::{DMatrix, Matrix3, Point3, Vector2, Vector3};

use crate::error::{Error, Result};

/// Integer identifier of a point: its position in the cloud.
pub type PointId = u32;

/// An ordered, non-empty list of finite 3D points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        validate(&points)?;
        if points.len() > PointId::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "{} points exceed the id space",
                points.len()
            )));
        }
        Ok(Self { points })
    }

    pub fn from_coords<I>(coords: I) -> Result<Self>
    where
        I: IntoIterator<Item = [f64; 3]>,
    {
        Self::new(coords.into_iter().map(Point3::from).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; kept for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn get(&self, id: PointId) -> Option<&Point3<f64>> {
        self.points.get(id as usize)
    }

    /// Axis-aligned bounds as (min, max).
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        axis_bounds(self.points.iter().map(|p| p.coords))
    }
}

impl Index<PointId> for PointCloud {
    type Output = Point3<f64>;

    fn index(&self, id: PointId) -> &Point3<f64> {
        &self.points[id as usize]
    }
}

fn validate(points: &[Point3<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::NonFiniteInput(i));
    }
    Ok(())
}

/// Which bounding box drives the hash frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BoxMode {
    #[default]
    Obb,
    Aabb,
}

/// Center, orientation and half-extents of a bounding box.
///
/// The rotation's columns are the LRF axes expressed in original
/// coordinates; `to_lrf` applies its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct ObbFrame {
    pub center: Point3<f64>,
    pub rotation: Matrix3<f64>,
    pub half_extents: Vector3<f64>,
}

impl ObbFrame {
    /// Fits a box to raw points. See [`compute_obb`].
    pub fn fit(points: &[Point3<f64>], mode: BoxMode) -> Result<Self> {
        validate(points)?;
        let frame = match mode {
            BoxMode::Aabb => {
                let (lo, hi) = axis_bounds(points.iter().map(|p| p.coords));
                Self {
                    center: nalgebra::center(&lo, &hi),
                    rotation: Matrix3::identity(),
                    half_extents: (hi - lo) * 0.5,
                }
            }
            BoxMode::Obb => fit_oriented(points),
        };
        Ok(frame.padded())
    }

    /// `rotationᵀ · (p − center)`.
    #[inline]
    pub fn to_lrf(&self, p: &Point3<f64>) -> Vector3<f64> {
        self.rotation.tr_mul(&(p - self.center))
    }

    #[inline]
    pub fn from_lrf(&self, p: &Vector3<f64>) -> Point3<f64> {
        self.center + self.rotation * p
    }

    /// Length of the box's space diagonal, the scale for all tolerances.
    pub fn diagonal(&self) -> f64 {
        2.0 * self.half_extents.norm()
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    /// The eight corners in original coordinates.
    pub fn vertices(&self) -> [Point3<f64>; 8] {
        let h = self.half_extents;
        std::array::from_fn(|i| {
            let s = |bit: usize| if i & bit == 0 { 1.0 } else { -1.0 };
            self.from_lrf(&Vector3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z))
        })
    }

    /// True if `p` lies inside the box grown by `eps` on every side.
    pub fn contains(&self, p: &Point3<f64>, eps: f64) -> bool {
        let q = self.to_lrf(p);
        (0..3).all(|i| q[i].abs() <= self.half_extents[i] + eps)
    }

    fn padded(mut self) -> Self {
        let largest = self.half_extents.max();
        let floor = EXTENT_FLOOR * if largest > 0.0 { largest } else { 1.0 };
        for e in self.half_extents.iter_mut() {
            if *e < floor {
                *e = floor;
            }
        }
        self
    }
}

/// Relative floor applied to degenerate half-extents.
pub const EXTENT_FLOOR: f64 = 1e-9;

/// Builds the OBB (SVD orientation) or AABB of a cloud.
pub fn compute_obb(cloud: &PointCloud, mode: BoxMode) -> Result<ObbFrame> {
    ObbFrame::fit(cloud.points(), mode)
}

pub fn to_lrf(frame: &ObbFrame, p: &Point3<f64>) -> Vector3<f64> {
    frame.to_lrf(p)
}

pub fn from_lrf(frame: &ObbFrame, p: &Vector3<f64>) -> Point3<f64> {
    frame.from_lrf(p)
}

fn axis_bounds(it: impl Iterator<Item = Vector3<f64>>) -> (Point3<f64>, Point3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in it {
        lo = lo.inf(&v);
        hi = hi.sup(&v);
    }
    (lo.into(), hi.into())
}

/// Singular values closer than this (relative to the largest) are treated
/// as equal, leaving the orientation inside their subspace undetermined.
const DEGENERACY_TOL: f64 = 1e-6;

fn fit_oriented(points: &[Point3<f64>]) -> ObbFrame {
    let m = points.len();
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / m as f64;
    let centered: Vec<Vector3<f64>> = points.iter().map(|p| p.coords - mean).collect();

    // Zero rows leave the right singular vectors unchanged and keep the
    // thin SVD at full rank for m < 3.
    let rows = m.max(3);
    let a = DMatrix::from_fn(rows, 3, |r, c| if r < m { centered[r][c] } else { 0.0 });
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");

    let mut axes: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| {
            (
                svd.singular_values[i],
                Vector3::new(v_t[(i, 0)], v_t[(i, 1)], v_t[(i, 2)]),
            )
        })
        .collect();
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let sigma = [axes[0].0, axes[1].0, axes[2].0];
    let mut basis = orthonormalize([axes[0].1, axes[1].1, axes[2].1]);

    let tol = DEGENERACY_TOL * sigma[0];
    if sigma[0] > 0.0 {
        let tie01 = sigma[0] - sigma[1] <= tol;
        let tie12 = sigma[1] - sigma[2] <= tol;
        basis = match (tie01, tie12) {
            (true, true) => refine_isotropic(&centered, basis),
            (true, false) => refine_plane(&centered, basis, [0, 1]),
            (false, true) => refine_plane(&centered, basis, [1, 2]),
            (false, false) => basis,
        };
    } else {
        basis = [Vector3::x(), Vector3::y(), Vector3::z()];
    }

    let rotation = fix_signs(basis);
    let (lo, hi) = axis_bounds(centered.iter().map(|c| rotation.tr_mul(c)));
    let mid = (lo.coords + hi.coords) * 0.5;
    ObbFrame {
        center: Point3::from(mean + rotation * mid),
        rotation,
        half_extents: (hi - lo) * 0.5,
    }
}

fn orthonormalize(v: [Vector3<f64>; 3]) -> [Vector3<f64>; 3] {
    let a = v[0].normalize();
    let b = (v[1] - a * a.dot(&v[1])).normalize();
    [a, b, a.cross(&b)]
}

/// Largest-magnitude component of each axis made positive, then the third
/// axis flipped if needed so that det = +1.
fn fix_signs(basis: [Vector3<f64>; 3]) -> Matrix3<f64> {
    let mut cols = basis;
    for c in cols.iter_mut() {
        let (imax, _) = c.iter().enumerate().fold(
            (0, -1.0),
            |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best },
        );
        if c[imax] < 0.0 {
            *c = -*c;
        }
    }
    let mut r = Matrix3::from_columns(&cols);
    if r.determinant() < 0.0 {
        r.set_column(2, &(-cols[2]));
    }
    r
}

/// When two singular values tie, PCA leaves the rotation within their plane
/// free. Pick the minimum-area rectangle of the projected points instead.
fn refine_plane(centered: &[Vector3<f64>], basis: [Vector3<f64>; 3], plane: [usize; 2]) -> [Vector3<f64>; 3] {
    let (e1, e2) = (basis[plane[0]], basis[plane[1]]);
    let pts: Vec<Vector2<f64>> = centered.iter().map(|c| Vector2::new(c.dot(&e1), c.dot(&e2))).collect();
    let Some((dir, _)) = min_area_rectangle(&pts) else {
        return basis;
    };
    let mut out = basis;
    out[plane[0]] = e1 * dir.x + e2 * dir.y;
    out[plane[1]] = e1 * -dir.y + e2 * dir.x;
    out
}

/// All three singular values tie (e.g. a cube's corners). Candidate first
/// axes are the directions between extreme points; each is completed by a
/// minimum-area rectangle in its orthogonal plane and the smallest box wins.
fn refine_isotropic(centered: &[Vector3<f64>], basis: [Vector3<f64>; 3]) -> [Vector3<f64>; 3] {
    let mut extremes: Vec<Vector3<f64>> = Vec::new();
    for dx in -1i32..=1 {
        for dy in -1i32..=1 {
            for dz in -1i32..=1 {
                if (dx, dy, dz) == (0, 0, 0) {
                    continue;
                }
                let d = basis[0] * dx as f64 + basis[1] * dy as f64 + basis[2] * dz as f64;
                let best = centered
                    .iter()
                    .max_by(|a, b| a.dot(&d).total_cmp(&b.dot(&d)))
                    .copied()
                    .unwrap_or_else(Vector3::zeros);
                if !extremes.iter().any(|e| (e - best).norm() == 0.0) {
                    extremes.push(best);
                }
            }
        }
    }

    let mut candidates: Vec<Vector3<f64>> = basis.to_vec();
    for i in 0..extremes.len() {
        for j in i + 1..extremes.len() {
            let d = extremes[j] - extremes[i];
            if d.norm() > 0.0 {
                candidates.push(d.normalize());
            }
        }
    }

    let mut best = basis;
    let mut best_volume = f64::INFINITY;
    for axis in candidates {
        let helper = if axis.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
        let e1 = axis.cross(&helper).normalize();
        let e2 = axis.cross(&e1);
        let (lo, hi) = centered
            .iter()
            .map(|c| c.dot(&axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        let pts: Vec<Vector2<f64>> = centered.iter().map(|c| Vector2::new(c.dot(&e1), c.dot(&e2))).collect();
        let Some((dir, area)) = min_area_rectangle(&pts) else {
            continue;
        };
        let volume = (hi - lo) * area;
        if volume < best_volume * (1.0 - 1e-12) {
            best_volume = volume;
            let b1 = e1 * dir.x + e2 * dir.y;
            let b2 = e1 * -dir.y + e2 * dir.x;
            best = [axis, b1, b2];
        }
    }
    best
}

/// Minimum-area enclosing rectangle of 2D points, returned as the unit
/// direction of one side and the area. `None` if the hull is degenerate.
fn min_area_rectangle(pts: &[Vector2<f64>]) -> Option<(Vector2<f64>, f64)> {
    let hull = convex_hull(pts);
    if hull.len() < 3 {
        return None;
    }
    let mut best: Option<(Vector2<f64>, f64)> = None;
    for i in 0..hull.len() {
        let edge = hull[(i + 1) % hull.len()] - hull[i];
        let len = edge.norm();
        if len == 0.0 {
            continue;
        }
        let d = edge / len;
        let n = Vector2::new(-d.y, d.x);
        let (mut a0, mut a1, mut b0, mut b1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in &hull {
            let (a, b) = (p.dot(&d), p.dot(&n));
            a0 = a0.min(a);
            a1 = a1.max(a);
            b0 = b0.min(b);
            b1 = b1.max(b);
        }
        let area = (a1 - a0) * (b1 - b0);
        if best.is_none_or(|(_, ba)| area < ba * (1.0 - 1e-12)) {
            best = Some((d, area));
        }
    }
    best
}

/// Andrew's monotone chain; counter-clockwise without collinear points.
fn convex_hull(pts: &[Vector2<f64>]) -> Vec<Vector2<f64>> {
    let mut p: Vec<Vector2<f64>> = pts.to_vec();
    p.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let cross =
        |o: &Vector2<f64>, a: &Vector2<f64>, b: &Vector2<f64>| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut hull: Vec<Vector2<f64>> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vector2<f64>>> = if pass == 0 {
            Box::new(p.iter())
        } else {
            Box::new(p.iter().rev())
        };
        for q in iter {
            while hull.len() >= start + 2 && cross(&hull[hull.len() - 2], &hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(*q);
        }
        hull.pop();
    }
    hull
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Rotation3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube_corners() -> Vec<Point3<f64>> {
        (0..8)
            .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect()
    }

    fn assert_contains_all(frame: &ObbFrame, pts: &[Point3<f64>]) {
        let eps = 1e-9 * frame.diagonal();
        for p in pts {
            assert!(frame.contains(p, eps), "{p:?} escapes {frame:?}");
        }
    }

    fn assert_rotation_valid(r: &Matrix3<f64>) {
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        assert!(err < 1e-9, "not orthonormal: {err}");
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn aabb_of_unit_cube() {
        let cloud = PointCloud::new(cube_corners()).unwrap();
        let f = compute_obb(&cloud, BoxMode::Aabb).unwrap();
        assert_relative_eq!(f.center, Point3::new(0.5, 0.5, 0.5));
        assert_relative_eq!(f.half_extents, Vector3::new(0.5, 0.5, 0.5));
        assert_eq!(f.rotation, Matrix3::identity());
    }

    #[test]
    fn obb_recovers_rotated_cube() {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_4);
        let pts: Vec<_> = cube_corners().iter().map(|p| rot * p).collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let f = compute_obb(&cloud, BoxMode::Obb).unwrap();
        let mut h: Vec<f64> = f.half_extents.iter().copied().collect();
        h.sort_by(f64::total_cmp);
        for e in h {
            assert!((e - 0.5).abs() < 1e-6, "{:?}", f.half_extents);
        }
        assert!((f.volume() - 1.0).abs() < 1e-6);
        assert_rotation_valid(&f.rotation);
        assert_contains_all(&f, &pts);
    }

    #[test]
    fn repeated_point_is_padded() {
        let cloud = PointCloud::new(vec![Point3::new(1.0, 2.0, 3.0); 3]).unwrap();
        for mode in [BoxMode::Obb, BoxMode::Aabb] {
            let f = compute_obb(&cloud, mode).unwrap();
            assert_relative_eq!(f.center, Point3::new(1.0, 2.0, 3.0), epsilon = 1e-12);
            assert_eq!(f.half_extents, Vector3::repeat(EXTENT_FLOOR));
            assert_rotation_valid(&f.rotation);
        }
    }

    #[test]
    fn planar_and_collinear_clouds_are_padded() {
        let line: Vec<_> = (0..10).map(|i| Point3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let f = ObbFrame::fit(&line, BoxMode::Obb).unwrap();
        assert!(f.half_extents.min() > 0.0);
        assert_relative_eq!(f.half_extents.max(), 0.5 * 9.0 * 5f64.sqrt(), epsilon = 1e-9);
        assert_contains_all(&f, &line);
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(matches!(PointCloud::new(vec![]), Err(Error::EmptyCloud)));
        let bad = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(f64::NAN, 0.0, 0.0)];
        assert!(matches!(PointCloud::new(bad.clone()), Err(Error::NonFiniteInput(1))));
        assert!(matches!(
            ObbFrame::fit(&bad, BoxMode::Obb),
            Err(Error::NonFiniteInput(1))
        ));
    }

    #[test]
    fn lrf_examples() {
        let f = ObbFrame {
            center: Point3::new(1.0, 1.0, 1.0),
            rotation: Matrix3::identity(),
            half_extents: Vector3::repeat(1.0),
        };
        assert_eq!(f.to_lrf(&f.center), Vector3::zeros());
        assert_eq!(f.to_lrf(&Point3::new(2.0, 1.0, 1.0)), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(f.from_lrf(&Vector3::zeros()), f.center);
    }

    #[test]
    fn lrf_round_trip_random_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let axis = nalgebra::Unit::new_normalize(Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ));
            let rot = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..6.3));
            let f = ObbFrame {
                center: Point3::new(rng.random_range(-50.0..50.0), 3.0, -7.0),
                rotation: *rot.matrix(),
                half_extents: Vector3::new(4.0, 2.0, 1.0),
            };
            let tol = 1e-12 * f.diagonal();
            for _ in 0..50 {
                let p = Point3::new(
                    rng.random_range(-60.0..60.0),
                    rng.random_range(-60.0..60.0),
                    rng.random_range(-60.0..60.0),
                );
                let back = f.from_lrf(&f.to_lrf(&p));
                assert!((back - p).norm() <= tol);
            }
        }
    }

    #[test]
    fn convex_hull_square() {
        let pts: Vec<_> = [(0., 0.), (1., 0.), (1., 1.), (0., 1.), (0.5, 0.5), (0.5, 0.0)]
            .iter()
            .map(|&(x, y)| Vector2::new(x, y))
            .collect();
        assert_eq!(convex_hull(&pts).len(), 4);
        let (_, area) = min_area_rectangle(&pts).unwrap();
        assert_relative_eq!(area, 1.0);
    }
}
