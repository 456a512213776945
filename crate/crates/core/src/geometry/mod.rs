//! Meshes, point clouds, transforms and the low-level predicates shared by
//! every other module.

mod bounds;
pub mod bvh;
pub mod intersect;
pub mod io;
pub mod kdtree;
mod mesh;
pub mod primitives;
mod sampling;
mod transform;

use thiserror::Error;

pub use bounds::{compute_obb, estimate_scale_from_obb, Aabb, Obb};
pub use intersect::triangle_triangle_intersect;
pub use io::{load_mesh, save_obj, write_obj};
pub use mesh::{PointCloud, Triangle, TriangleMesh};
pub use sampling::sample_surface;
pub use transform::SimilarityTransform;

pub type Point = nalgebra::Point3<f64>;
pub type Vector = nalgebra::Vector3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("mesh file not found: {0}")]
    FileNotFound(std::path::PathBuf),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("malformed mesh file {path}: {reason}")]
    Malformed { path: std::path::PathBuf, reason: String },
    #[error("degenerate mesh: {0}")]
    DegenerateMesh(String),
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {0} repeats a vertex index")]
    RepeatedIndex(usize),
    #[error("degenerate triangle (area {0:e})")]
    DegenerateTriangle(f64),
    #[error("degenerate source box: every extent is zero")]
    DegenerateSource,
    #[error("sample count must be at least 1")]
    EmptySample,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
