//! Composition of independently authored triangle meshes into a physically
//! plausible scene.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: meshes, point clouds, similarity transforms, bounding
//!   volumes, spatial indices and exact triangle predicates.
//! * [`registration`]: closed-form similarity estimation, scale-aware ICP,
//!   a pluggable coarse registrar and the global-to-local alignment pipeline.
//! * [`sdf`]: dense signed distance grids baked from meshes.
//! * [`collision`]: the penetration penalty, the annealed composition
//!   objective and the placement optimizer.
//! * [`metrics`]: surface and volume intersection ratios.
//! * [`pipeline`]: scene files, anchor selection, pairwise and sequential
//!   composition, the refinement loop and the synthetic case generator.

pub mod collision;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod registration;
pub mod rng;
pub mod sdf;

pub use collision::{CollisionParams, OptimizationTrace, PoseDelta};
pub use geometry::{Aabb, GeometryError, Obb, PointCloud, SimilarityTransform, TriangleMesh};
pub use metrics::IntersectionReport;
pub use pipeline::{ComposedScene, SceneSpec};
pub use registration::{IcpParams, IcpResult};
pub use sdf::{DistanceField, SdfGrid};
