//! Two-level locality-sensitive hashing index for exact nearest-neighbor
//! and radius search in 3D point clouds.
//!
//! Points are bucketed by the octant, pyramid block and slice they occupy
//! in the cloud's oriented bounding box. Queries scan the home bin and
//! expand through adjacent bins, pruned by a plane-distance bound.

pub mod baselines;
pub mod error;
pub mod geometry;
pub mod index;
pub mod io;
pub mod query;
pub mod synth;

pub use baselines::{bruteforce_knn, bruteforce_radius, BruteForce, KdTree, NeighborStructure, Octree};
pub use error::{Error, Location, Result};
pub use geometry::{compute_obb, from_lrf, to_lrf, BoxMode, ObbFrame, PointCloud, PointId};
pub use index::{bin_geometry, select_div, BinGeometry, BinIndex, HashIndex, Plane, BLOCKS};
pub use io::{export_highlight, load_cloud, save_ply, save_xyz, Format, SearchPoint};
pub use query::{min_dist_boun, Hit, QueryResult, SearchOptions, SearchStats};
