//! Virtual range scanning of triangle meshes, visibility augmentation of the
//! resulting point clouds (sightline vectors and auxiliary points), classical
//! visibility-carving reconstruction, and surface evaluation metrics.

pub mod augment;
pub mod cli;
pub mod error;
pub mod geom;
pub mod kdtree;
pub mod mesh;
pub mod metrics;
pub mod normals;
pub mod ply;
pub mod reconstruct;
pub mod rng;
pub mod scanner;

pub use error::{Result, VizError};
pub use geom::{Aabb, Similarity, Vec3};
pub use mesh::TriangleMesh;
pub use scanner::{ScanConfig, ScannedPointCloud};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
