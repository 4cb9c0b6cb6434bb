use std::fmt;
use std::path::PathBuf;

use crate::index::BinIndex;

/// Where in an input file a parse failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Line(usize),
    Offset(u64),
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Location::Line(l) => write!(f, "line {l}"),
            Location::Offset(o) => write!(f, "byte offset {o}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFiniteInput(usize),
    #[error("bin {0:?} is out of range for div = {1}")]
    BinOutOfRange(BinIndex, u32),
    #[error("index holds no points")]
    EmptyIndex,
    #[error("k must be at least 1")]
    KZero,
    #[error("radius must be positive and finite, got {0}")]
    RNonPositive(f64),
    #[error("octree layer {0} exceeds the node budget")]
    LayerTooLarge(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parse error in {path} at {at}: {message}")]
    Parse {
        path: PathBuf,
        at: Location,
        message: String,
    },
    #[error("{path}: header declares {declared} vertices but {found} were read")]
    CountMismatch {
        path: PathBuf,
        declared: usize,
        found: usize,
    },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
