use rand::Rng;
use rayon::prelude::*;

use super::{GeometryError, Point, PointCloud, TriangleMesh};
use crate::rng;

/// Area-weighted uniform surface samples.
///
/// Sample `i` is drawn from stream `i / BLOCK` of `seed`, so the result is
/// identical for any thread count.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud, GeometryError> {
    if n == 0 {
        return Err(GeometryError::EmptySample);
    }
    mesh.ensure_surface()?;

    let mut cdf = Vec::with_capacity(mesh.num_faces());
    let mut acc = 0.0;
    for a in mesh.face_areas() {
        acc += a;
        cdf.push(acc);
    }
    let total = acc;

    let blocks = n.div_ceil(rng::BLOCK);
    let chunks: Vec<Vec<(Point, usize)>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b as u64);
            let count = rng::BLOCK.min(n - b * rng::BLOCK);
            (0..count)
                .map(|_| {
                    let x = r.gen::<f64>() * total;
                    let face = cdf.partition_point(|&c| c <= x).min(cdf.len() - 1);
                    let (mut u, mut v): (f64, f64) = (r.gen(), r.gen());
                    if u + v > 1.0 {
                        u = 1.0 - u;
                        v = 1.0 - v;
                    }
                    let [a, b, c] = mesh.triangle(face);
                    (a + (b - a) * u + (c - a) * v, face)
                })
                .collect()
        })
        .collect();

    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for (p, f) in chunks.into_iter().flatten() {
        points.push(p);
        faces.push(f);
    }
    Ok(PointCloud { points, source_faces: Some(faces) })
}
