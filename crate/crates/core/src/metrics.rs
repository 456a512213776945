//! Physical-validity metrics for a pair of placed meshes: the fraction of
//! surface area involved in triangle intersections, a Monte Carlo volume
//! overlap ratio and penetration depth.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::bvh::Bvh;
use crate::geometry::intersect::overlap_unchecked;
use crate::geometry::{sample_surface, Aabb, GeometryError, Point, PointCloud, TriangleMesh, Vector};
use crate::rng::{self, derive_seed, BLOCK};
use crate::sdf::DistanceField;

/// Monte Carlo sample count used when none is given.
pub const DEFAULT_SAMPLES: usize = 1_000_000;
/// Surface samples of B probed for penetration into A.
const PENETRATION_PROBES: usize = 20_000;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no sample fell inside either mesh; the volume ratio is undefined")]
    NoInteriorSamples,
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// Fraction of total surface area on triangles that touch the other mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceIntersection {
    pub ratio: f64,
    pub involved_a: Vec<usize>,
    pub involved_b: Vec<usize>,
}

/// `R_surface = A_int / (A_A + A_B)`, where `A_int` sums the areas of every
/// triangle (of either mesh) that intersects at least one triangle of the
/// other. Contact counts as intersection. Zero-area faces never count.
pub fn surface_intersection_ratio(a: &TriangleMesh, b: &TriangleMesh) -> Result<SurfaceIntersection, MetricsError> {
    a.ensure_surface()?;
    b.ensure_surface()?;
    let ba = Bvh::from_mesh_nondegenerate(a);
    let bb = Bvh::from_mesh_nondegenerate(b);
    let mut hit_a = vec![false; a.num_faces()];
    let mut hit_b = vec![false; b.num_faces()];
    ba.overlapping_pairs(&bb, |sa, sb| {
        let (fa, fb) = (ba.face(sa), bb.face(sb));
        if hit_a[fa] && hit_b[fb] {
            return;
        }
        if overlap_unchecked(ba.triangle(sa), bb.triangle(sb)) {
            hit_a[fa] = true;
            hit_b[fb] = true;
        }
    });
    Ok(surface_ratio_from_sets(a, b, &hit_a, &hit_b))
}

fn surface_ratio_from_sets(a: &TriangleMesh, b: &TriangleMesh, hit_a: &[bool], hit_b: &[bool]) -> SurfaceIntersection {
    let area = |m: &TriangleMesh, hit: &[bool]| -> f64 {
        m.face_areas().iter().zip(hit).filter(|(_, &h)| h).map(|(x, _)| x).sum()
    };
    let ratio = (area(a, hit_a) + area(b, hit_b)) / (a.total_area() + b.total_area());
    let idx = |hit: &[bool]| hit.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| i).collect();
    SurfaceIntersection { ratio, involved_a: idx(hit_a), involved_b: idx(hit_b) }
}

/// All-pairs reference for [`surface_intersection_ratio`].
pub fn surface_intersection_ratio_brute_force(
    a: &TriangleMesh,
    b: &TriangleMesh,
) -> Result<SurfaceIntersection, MetricsError> {
    a.ensure_surface()?;
    b.ensure_surface()?;
    let ok = |m: &TriangleMesh, f: usize| m.face_areas()[f] > crate::geometry::intersect::MIN_AREA;
    let mut hit_a = vec![false; a.num_faces()];
    let mut hit_b = vec![false; b.num_faces()];
    for fa in (0..a.num_faces()).filter(|&f| ok(a, f)) {
        let ta = a.triangle(fa);
        for fb in (0..b.num_faces()).filter(|&f| ok(b, f)) {
            if overlap_unchecked(&ta, &b.triangle(fb)) {
                hit_a[fa] = true;
                hit_b[fb] = true;
            }
        }
    }
    Ok(surface_ratio_from_sets(a, b, &hit_a, &hit_b))
}

/// A region with a point-membership test.
pub trait Solid: Sync {
    fn contains(&self, p: &Point) -> bool;
}

/// Fixed, generic ray directions; none is parallel to a coordinate plane.
const DIRECTIONS: [[f64; 3]; 7] = [
    [0.5773502691896258, 0.5773502691896258, 0.5773502691896258],
    [-0.3713906763541037, 0.5570860145311556, 0.7427813527082074],
    [0.6246950475544243, -0.7808688094430304, 0.0312347523777212],
    [0.2672612419124244, 0.5345224838248488, -0.8017837257372732],
    [-0.8164965809277261, -0.4082482904638630, 0.4082482904638630],
    [0.1240347345892084, -0.3721042037676254, -0.9198132537423271],
    [-0.6859943405700354, 0.5144957554275265, -0.5144957554275266],
];

/// Ray-parity membership for a closed triangle mesh: a majority of three
/// non-grazing rays.
pub struct MeshSolid {
    bvh: Bvh,
    bbox: Aabb,
}

impl MeshSolid {
    pub fn new(mesh: &TriangleMesh) -> Result<Self, MetricsError> {
        mesh.ensure_surface()?;
        Ok(Self { bvh: Bvh::from_mesh_nondegenerate(mesh), bbox: mesh.aabb() })
    }

    pub fn bbox(&self) -> Aabb {
        self.bbox
    }
}

impl Solid for MeshSolid {
    fn contains(&self, p: &Point) -> bool {
        if !self.bbox.contains(p) {
            return false;
        }
        let (mut inside, mut cast) = (0, 0);
        for d in DIRECTIONS {
            let Ok(n) = self.bvh.crossings(p, &Vector::from(d)) else { continue };
            cast += 1;
            inside += n % 2;
            if inside >= 2 || cast - inside >= 2 {
                break;
            }
        }
        inside >= 2 || (cast == 1 && inside == 1)
    }
}

/// Sign of a distance field: inside where the value is negative.
pub struct FieldSolid<'a>(pub &'a dyn DistanceField);

impl Solid for FieldSolid<'_> {
    fn contains(&self, p: &Point) -> bool {
        self.0.point_inside(p)
    }
}

/// `|A ∩ B| / |A ∪ B|` estimated from `n` uniform samples of `bbox`.
/// Blocks of samples use independent seeded streams, so the result does
/// not depend on the thread count.
pub fn volume_ratio_with(a: &dyn Solid, b: &dyn Solid, bbox: &Aabb, n: usize, seed: u64) -> Result<f64, MetricsError> {
    if n == 0 {
        return Err(MetricsError::NoSamples);
    }
    let blocks = n.div_ceil(BLOCK);
    let ext = bbox.extent();
    let (both, either) = (0..blocks)
        .into_par_iter()
        .map(|blk| {
            let mut r = rng::stream(seed, blk as u64);
            let count = BLOCK.min(n - blk * BLOCK);
            let (mut both, mut either) = (0usize, 0usize);
            for _ in 0..count {
                let u: [f64; 3] = r.gen();
                let p = bbox.min + ext.component_mul(&Vector::from(u));
                let ia = a.contains(&p);
                let ib = b.contains(&p);
                both += (ia && ib) as usize;
                either += (ia || ib) as usize;
            }
            (both, either)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    if either == 0 {
        return Err(MetricsError::NoInteriorSamples);
    }
    Ok(both as f64 / either as f64)
}

/// Monte Carlo volume intersection ratio over the joint bounding box, with
/// ray-parity inside tests.
pub fn volume_intersection_ratio(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed: u64) -> Result<f64, MetricsError> {
    let sa = MeshSolid::new(a)?;
    let sb = MeshSolid::new(b)?;
    volume_ratio_with(&sa, &sb, &sa.bbox.union(&sb.bbox), n, seed)
}

/// `max(0, max_p −Φ(p))`.
pub fn max_penetration_depth(field: &dyn DistanceField, points: &PointCloud) -> f64 {
    points
        .points
        .par_iter()
        .map(|p| -field.value(p))
        .reduce(|| 0.0, f64::max)
        .max(0.0)
}

/// Deepest point of `points` inside `solid`, measured as exact distance to
/// its surface.
pub fn max_penetration_depth_exact(solid: &MeshSolid, points: &[Point]) -> f64 {
    points
        .par_iter()
        .filter(|p| solid.contains(p))
        .map(|p| solid.bvh.closest(p, f64::INFINITY).map_or(0.0, |h| h.distance_squared.sqrt()))
        .reduce(|| 0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionReport {
    pub r_surface: f64,
    pub r_volume: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub intersecting_face_counts: (usize, usize),
    /// Deepest surface point of either mesh inside the other (model units).
    pub max_penetration_depth: f64,
}

/// Both ratios plus the deeper of the two mutual penetration depths.
pub fn intersection_report(a: &TriangleMesh, b: &TriangleMesh, n: usize, seed: u64) -> Result<IntersectionReport, MetricsError> {
    let surf = surface_intersection_ratio(a, b)?;
    let sa = MeshSolid::new(a)?;
    let sb = MeshSolid::new(b)?;
    let r_volume = volume_ratio_with(&sa, &sb, &sa.bbox.union(&sb.bbox), n, seed)?;
    let probes = |m: &TriangleMesh, tag: u64| -> Result<Vec<Point>, MetricsError> {
        let mut pts = sample_surface(m, PENETRATION_PROBES, derive_seed(seed, tag))?.points;
        pts.extend_from_slice(m.vertices());
        Ok(pts)
    };
    let depth = max_penetration_depth_exact(&sa, &probes(b, 0x9E7)?).max(max_penetration_depth_exact(&sb, &probes(a, 0x9E8)?));
    Ok(IntersectionReport {
        r_surface: surf.ratio,
        r_volume,
        n_samples: n,
        seed,
        intersecting_face_counts: (surf.involved_a.len(), surf.involved_b.len()),
        max_penetration_depth: depth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, SimilarityTransform};
    use crate::sdf::bake_sdf;
    use nalgebra::UnitQuaternion;

    fn shifted(m: &TriangleMesh, x: f64, y: f64, z: f64) -> TriangleMesh {
        m.transformed(&SimilarityTransform::new(1.0, UnitQuaternion::identity(), Vector::new(x, y, z)))
    }

    #[test]
    fn surface_ratio_cases() {
        let c = primitives::unit_cube();
        assert_eq!(surface_intersection_ratio(&c, &shifted(&c, 2.0, 0.0, 0.0)).unwrap().ratio, 0.0);
        assert_eq!(surface_intersection_ratio(&c, &c).unwrap().ratio, 1.0);
        let d = shifted(&primitives::subdivided_box(Vector::new(0.5, 0.5, 0.5), 3), 0.5, 0.1, 0.0);
        let fast = surface_intersection_ratio(&c, &d).unwrap();
        let slow = surface_intersection_ratio_brute_force(&c, &d).unwrap();
        assert_eq!(fast, slow);
        let back = surface_intersection_ratio(&d, &c).unwrap();
        assert_eq!(back.ratio, fast.ratio);
    }

    #[test]
    fn volume_ratio_cases() {
        let c = primitives::unit_cube();
        assert_eq!(volume_intersection_ratio(&c, &c, 20_000, 1).unwrap(), 1.0);
        assert_eq!(volume_intersection_ratio(&c, &shifted(&c, 2.0, 0.0, 0.0), 20_000, 1).unwrap(), 0.0);
        let r = volume_intersection_ratio(&c, &shifted(&c, 0.5, 0.0, 0.0), 200_000, 2).unwrap();
        assert!((r - 1.0 / 3.0).abs() < 0.01, "{r}");
        let again = volume_intersection_ratio(&c, &shifted(&c, 0.5, 0.0, 0.0), 200_000, 2).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn shells_have_no_interior() {
        // Two coincident open squares enclose nothing.
        let sq = TriangleMesh::new(
            vec![Point::new(0.0, 0.0, 0.0), Point::new(1.0, 0.0, 0.0), Point::new(1.0, 1.0, 0.0), Point::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        assert!(matches!(volume_intersection_ratio(&sq, &sq, 1000, 0), Err(MetricsError::NoInteriorSamples)));
        assert!(matches!(volume_intersection_ratio(&sq, &sq, 0, 0), Err(MetricsError::NoSamples)));
    }

    #[test]
    fn penetration_from_grid() {
        let c = primitives::unit_cube();
        let g = bake_sdf(&c, 32, 0.2).unwrap();
        assert_eq!(max_penetration_depth(&g, &PointCloud::new(vec![Point::new(2.0, 0.0, 0.0)])), 0.0);
        assert_eq!(max_penetration_depth(&g, &PointCloud::new(vec![])), 0.0);
        let d = max_penetration_depth(&g, &PointCloud::new(vec![Point::origin()]));
        assert!((d - 0.5).abs() < 1.5 * g.spacing());
    }

    #[test]
    fn report_for_offset_cubes() {
        let c = primitives::unit_cube();
        let r = intersection_report(&c, &shifted(&c, 0.8, 0.0, 0.0), 50_000, 3).unwrap();
        assert!(r.r_surface > 0.0 && r.r_surface < 1.0);
        assert!((r.max_penetration_depth - 0.2).abs() < 1e-9, "{}", r.max_penetration_depth);
        assert!(r.intersecting_face_counts.0 <= 12 && r.intersecting_face_counts.1 <= 12);
    }
}
