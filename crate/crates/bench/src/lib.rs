//! Shared fixtures for the kernel benchmarks in `benches/`.

use meshcompose::geometry::{primitives, sample_surface, PointCloud, SimilarityTransform, TriangleMesh, Vector};
use nalgebra::UnitQuaternion;

pub fn moved(mesh: &TriangleMesh, x: f64, angle: f64) -> TriangleMesh {
    mesh.transformed(&SimilarityTransform::new(
        1.0,
        UnitQuaternion::from_euler_angles(angle, 0.5 * angle, 0.0),
        Vector::new(x, 0.0, 0.0),
    ))
}

/// Two overlapping spheres of roughly `faces` triangles each.
pub fn sphere_pair(level: usize) -> (TriangleMesh, TriangleMesh) {
    let a = primitives::icosphere(0.5, level);
    let b = moved(&a, 0.4, 0.3);
    (a, b)
}

/// A cloud and an exact similarity image of it.
pub fn cloud_pair(n: usize) -> (PointCloud, PointCloud, SimilarityTransform) {
    let src = sample_surface(&primitives::subdivided_box(Vector::new(0.5, 0.3, 0.2), 4), n, 1).expect("sample");
    let t = SimilarityTransform::new(1.3, UnitQuaternion::from_euler_angles(0.2, -0.4, 0.9), Vector::new(0.5, -1.0, 2.0));
    let tgt = src.transformed(&t);
    (src, tgt, t)
}
