//! Closed-set triangle/triangle overlap.
//!
//! Two convex sets are disjoint iff some axis separates their projections.
//! For triangles it suffices to try both normals, the nine edge/edge cross
//! products and the six in-plane edge normals (the last group only matters
//! for coplanar pairs). Touching counts as overlap: an axis separates only
//! when the projected intervals leave a gap wider than a tolerance scaled
//! to the coordinates involved.
//!
//! The candidate axis set is closed under swapping the arguments (edge
//! crosses merely flip sign), so the predicate is exactly symmetric.

use super::mesh::{triangle_area, Triangle};
use super::{GeometryError, Vector};

/// Triangles with area at or below this are rejected.
pub const MIN_AREA: f64 = 1e-14;

const REL_TOL: f64 = 1e-12;

pub fn triangle_triangle_intersect(t1: &Triangle, t2: &Triangle) -> Result<bool, GeometryError> {
    for t in [t1, t2] {
        let a = triangle_area(t);
        if !(a > MIN_AREA) {
            return Err(GeometryError::DegenerateTriangle(a));
        }
    }
    Ok(overlap_unchecked(t1, t2))
}

/// The predicate without the degeneracy check.
pub(crate) fn overlap_unchecked(t1: &Triangle, t2: &Triangle) -> bool {
    let scale = t1.iter().chain(t2.iter()).fold(1.0f64, |m, p| m.max(p.coords.amax()));
    let tol = REL_TOL * scale;

    let e1 = edges(t1);
    let e2 = edges(t2);
    let n1 = e1[0].cross(&e1[1]);
    let n2 = e2[0].cross(&e2[1]);

    let separated_on = |axis: Vector| -> bool {
        let Some(axis) = axis.try_normalize(1e-300) else {
            return false;
        };
        let (lo1, hi1) = project(t1, &axis);
        let (lo2, hi2) = project(t2, &axis);
        // Differences, not shifted bounds: negating the axis swaps the two
        // gaps exactly.
        lo2 - hi1 > tol || lo1 - hi2 > tol
    };

    if separated_on(n1) || separated_on(n2) {
        return false;
    }
    for a in &e1 {
        for b in &e2 {
            let c = a.cross(b);
            // Near-parallel edges give an unreliable axis.
            if c.norm_squared() > 1e-24 * a.norm_squared() * b.norm_squared() && separated_on(c) {
                return false;
            }
        }
    }
    for e in &e1 {
        if separated_on(n1.cross(e)) {
            return false;
        }
    }
    for e in &e2 {
        if separated_on(n2.cross(e)) {
            return false;
        }
    }
    true
}

fn edges(t: &Triangle) -> [Vector; 3] {
    [t[1] - t[0], t[2] - t[1], t[0] - t[2]]
}

fn project(t: &Triangle, axis: &Vector) -> (f64, f64) {
    let a = t[0].coords.dot(axis);
    let b = t[1].coords.dot(axis);
    let c = t[2].coords.dot(axis);
    (a.min(b).min(c), a.max(b).max(c))
}
