//! Python bindings. Points cross the boundary as sequences of `(x, y, z)`;
//! query results come back as lists of `(id, squared_distance)`.

use std::sync::Arc;

use nalgebra::Point3;
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use ::twolevel_lsh as core;
use core::{BinIndex, BoxMode, NeighborStructure, QueryResult};

fn to_py(e: core::Error) -> PyErr {
    match e {
        core::Error::Read { .. } | core::Error::Write { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn cloud_of(points: Vec<[f64; 3]>) -> PyResult<Arc<core::PointCloud>> {
    core::PointCloud::from_coords(points).map(Arc::new).map_err(to_py)
}

fn hits(r: QueryResult) -> Vec<(u32, f64)> {
    r.hits.into_iter().map(|h| (h.id, h.dist2)).collect()
}

/// `(center, rotation rows, half_extents)`.
type Frame = ([f64; 3], [[f64; 3]; 3], [f64; 3]);

fn frame_of(f: &core::ObbFrame) -> Frame {
    let r = f.rotation;
    (
        f.center.coords.into(),
        [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
        f.half_extents.into(),
    )
}

fn mode(aabb: bool) -> BoxMode {
    if aabb {
        BoxMode::Aabb
    } else {
        BoxMode::Obb
    }
}

/// Two-level hash index over a point cloud.
#[pyclass(frozen, name = "HashIndex")]
struct HashIndex(core::HashIndex);

#[pymethods]
impl HashIndex {
    #[new]
    #[pyo3(signature = (points, p_avg = None, div = None, aabb = false))]
    fn new(points: Vec<[f64; 3]>, p_avg: Option<u32>, div: Option<u32>, aabb: bool) -> PyResult<Self> {
        let cloud = cloud_of(points)?;
        let index = match div {
            Some(d) => core::HashIndex::build_with_div(cloud, mode(aabb), d),
            None => core::HashIndex::build(cloud, mode(aabb), p_avg),
        };
        index.map(Self).map_err(to_py)
    }

    #[getter]
    fn div(&self) -> u32 {
        self.0.div()
    }

    #[getter]
    fn p_avg(&self) -> u32 {
        self.0.p_avg()
    }

    #[getter]
    fn bin_count(&self) -> usize {
        self.0.bin_count()
    }

    fn __len__(&self) -> usize {
        self.0.cloud().len()
    }

    /// The fitted box.
    fn frame(&self) -> Frame {
        frame_of(self.0.frame())
    }

    /// `(block, proj)` of a point.
    fn hash(&self, p: [f64; 3]) -> (u32, u32) {
        let b = self.0.hash(&Point3::from(p));
        (b.block, b.proj)
    }

    fn bin_points(&self, block: u32, proj: u32) -> PyResult<Vec<u32>> {
        self.0
            .bin_points(BinIndex::new(block, proj))
            .map(<[u32]>::to_vec)
            .map_err(to_py)
    }

    fn neighbors(&self, block: u32, proj: u32) -> PyResult<Vec<(u32, u32)>> {
        Ok(self
            .0
            .neighbors(BinIndex::new(block, proj))
            .map_err(to_py)?
            .map(|b| (b.block, b.proj))
            .collect())
    }

    fn min_dist_boun(&self, q: [f64; 3], block: u32, proj: u32) -> PyResult<f64> {
        core::min_dist_boun(&Point3::from(q), BinIndex::new(block, proj), &self.0).map_err(to_py)
    }

    fn knn(&self, q: [f64; 3], k: usize) -> PyResult<Vec<(u32, f64)>> {
        self.0.knn(&Point3::from(q), k).map(hits).map_err(to_py)
    }

    fn radius(&self, q: [f64; 3], r: f64) -> PyResult<Vec<(u32, f64)>> {
        self.0.radius(&Point3::from(q), r).map(hits).map_err(to_py)
    }

    /// Pointer count under the 4-bytes-per-pointer memory model.
    fn pointer_count(&self) -> u64 {
        self.0.pointer_count()
    }
}

#[pyclass(frozen, name = "KdTree")]
struct KdTree(core::KdTree);

#[pymethods]
impl KdTree {
    #[new]
    fn new(points: Vec<[f64; 3]>) -> PyResult<Self> {
        Ok(Self(core::KdTree::build(cloud_of(points)?)))
    }

    fn knn(&self, q: [f64; 3], k: usize) -> PyResult<Vec<(u32, f64)>> {
        self.0.knn(&Point3::from(q), k).map(hits).map_err(to_py)
    }

    fn radius(&self, q: [f64; 3], r: f64) -> PyResult<Vec<(u32, f64)>> {
        self.0.radius(&Point3::from(q), r).map(hits).map_err(to_py)
    }

    fn pointer_count(&self) -> u64 {
        self.0.pointer_count()
    }
}

#[pyclass(frozen, name = "Octree")]
struct Octree(core::Octree);

#[pymethods]
impl Octree {
    #[new]
    #[pyo3(signature = (points, layer = None))]
    fn new(points: Vec<[f64; 3]>, layer: Option<u32>) -> PyResult<Self> {
        let cloud = cloud_of(points)?;
        let layer = layer.unwrap_or_else(|| core::baselines::default_layer(cloud.len()));
        core::Octree::build(cloud, layer).map(Self).map_err(to_py)
    }

    #[getter]
    fn layer(&self) -> u32 {
        self.0.layer()
    }

    fn knn(&self, q: [f64; 3], k: usize) -> PyResult<Vec<(u32, f64)>> {
        self.0.knn(&Point3::from(q), k).map(hits).map_err(to_py)
    }

    fn radius(&self, q: [f64; 3], r: f64) -> PyResult<Vec<(u32, f64)>> {
        self.0.radius(&Point3::from(q), r).map(hits).map_err(to_py)
    }

    fn pointer_count(&self) -> u64 {
        self.0.pointer_count()
    }
}

/// `(div, p_avg)` for a cloud of `m` points.
#[pyfunction]
#[pyo3(signature = (m, p_avg = None))]
fn select_div(m: usize, p_avg: Option<u32>) -> (u32, u32) {
    core::select_div(m, p_avg)
}

/// `(center, rotation rows, half_extents)` of the cloud's bounding box.
#[pyfunction]
#[pyo3(signature = (points, aabb = false))]
fn compute_obb(points: Vec<[f64; 3]>, aabb: bool) -> PyResult<Frame> {
    let f = core::compute_obb(cloud_of(points)?.as_ref(), mode(aabb)).map_err(to_py)?;
    Ok(frame_of(&f))
}

#[pyfunction]
fn bruteforce_knn(points: Vec<[f64; 3]>, q: [f64; 3], k: usize) -> PyResult<Vec<(u32, f64)>> {
    core::bruteforce_knn(cloud_of(points)?.as_ref(), &Point3::from(q), k)
        .map(hits)
        .map_err(to_py)
}

#[pyfunction]
fn bruteforce_radius(points: Vec<[f64; 3]>, q: [f64; 3], r: f64) -> PyResult<Vec<(u32, f64)>> {
    core::bruteforce_radius(cloud_of(points)?.as_ref(), &Point3::from(q), r)
        .map(hits)
        .map_err(to_py)
}

/// Reads XYZ, PLY or OFF; the format is detected from the file.
#[pyfunction]
fn load_cloud(path: std::path::PathBuf) -> PyResult<Vec<[f64; 3]>> {
    let cloud = core::load_cloud(path, None).map_err(to_py)?;
    Ok(cloud.points().iter().map(|p| p.coords.into()).collect())
}

#[pyfunction]
#[pyo3(signature = (points, path, binary = true))]
fn save_ply(points: Vec<[f64; 3]>, path: std::path::PathBuf, binary: bool) -> PyResult<()> {
    core::save_ply(cloud_of(points)?.as_ref(), path, binary).map_err(to_py)
}

#[pymodule]
fn twolevel_lsh(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<HashIndex>()?;
    m.add_class::<KdTree>()?;
    m.add_class::<Octree>()?;
    m.add_function(wrap_pyfunction!(select_div, m)?)?;
    m.add_function(wrap_pyfunction!(compute_obb, m)?)?;
    m.add_function(wrap_pyfunction!(bruteforce_knn, m)?)?;
    m.add_function(wrap_pyfunction!(bruteforce_radius, m)?)?;
    m.add_function(wrap_pyfunction!(load_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(save_ply, m)?)?;
    m.add("BLOCKS", core::BLOCKS)?;
    Ok(())
}
