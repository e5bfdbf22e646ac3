use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum VizError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("no geometry")]
    NoGeometry,

    #[error("triangle {triangle} references vertex {index} but only {count} vertices exist")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },

    #[error("zero-extent geometry")]
    ZeroExtent,

    #[error("empty mesh")]
    EmptyMesh,

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("unresolvable query point ({0}, {1}, {2})")]
    UnresolvableQuery(f64, f64, f64),

    #[error("mesh unreachable from sensors")]
    Unreachable,

    #[error("point {index} coincides with its sensor")]
    CoincidentSensor { index: usize },

    #[error("IoU requires watertight meshes")]
    NotWatertight,

    #[error("mode {mode} requires {missing}")]
    ModeMismatch { mode: String, missing: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl VizError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        VizError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VizError::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = VizError> = std::result::Result<T, E>;
