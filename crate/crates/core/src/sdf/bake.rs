use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{SdfError, SdfGrid};
use crate::geometry::bvh::Bvh;
use crate::geometry::{Point, TriangleMesh, Vector};
use crate::rng;

pub const DEFAULT_RESOLUTION: usize = 128;
pub const DEFAULT_PADDING: f64 = 0.2;

const JITTER: f64 = 1e-6;
const MAX_RECASTS: u64 = 8;
/// Vote disagreement above this flags a likely non-watertight mesh.
const WATERTIGHT_WARN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BakeStats {
    /// Fraction of lattice points whose three axis votes were not unanimous.
    pub disagreement_rate: f64,
    /// Rows whose axis-aligned ray grazed an edge and were re-cast per point.
    pub grazing_rows: usize,
    /// Lattice votes dropped because every jittered re-cast also grazed.
    pub abstentions: usize,
}

pub fn bake_sdf(mesh: &TriangleMesh, resolution: usize, padding_fraction: f64) -> Result<SdfGrid, SdfError> {
    bake_sdf_with_stats(mesh, resolution, padding_fraction).map(|(g, _)| g)
}

/// Exact unsigned distances via a BVH, signed by a majority vote of
/// crossing parity along the three lattice axes.
pub fn bake_sdf_with_stats(
    mesh: &TriangleMesh,
    resolution: usize,
    padding_fraction: f64,
) -> Result<(SdfGrid, BakeStats), SdfError> {
    if resolution < 8 {
        return Err(SdfError::InvalidParams(format!("resolution {resolution} is below 8")));
    }
    if !(padding_fraction >= 0.0 && padding_fraction.is_finite()) {
        return Err(SdfError::InvalidParams(format!("padding fraction {padding_fraction}")));
    }
    mesh.ensure_surface()?;

    let bbox = mesh.aabb();
    let padded = bbox.expanded(padding_fraction * bbox.diagonal());
    let ext = padded.extent();
    let spacing = ext.max() / (resolution - 1) as f64;
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = if a == padded.longest_axis() {
            resolution
        } else {
            ((ext[a] / spacing).ceil() as usize + 1).max(2)
        };
    }
    // Centre the shorter axes on the padded box.
    let mut origin = padded.min;
    for a in 0..3 {
        origin[a] -= 0.5 * ((dims[a] - 1) as f64 * spacing - ext[a]);
    }

    let bvh = Bvh::from_mesh_nondegenerate(mesh);
    let lattice = |i: usize, j: usize, k: usize| origin + Vector::new(i as f64, j as f64, k as f64) * spacing;
    let [nx, ny, nz] = dims;

    // Unsigned distances, one x row at a time so each point can bound its
    // search by the previous point's distance plus one step.
    let rows: Vec<Vec<f64>> = (0..ny * nz)
        .into_par_iter()
        .map(|row| {
            let (j, k) = (row % ny, row / ny);
            let mut out = Vec::with_capacity(nx);
            let mut prev: Option<f64> = None;
            for i in 0..nx {
                let p = lattice(i, j, k);
                let bound = prev.map_or(f64::INFINITY, |d| {
                    let b = d + spacing;
                    b * b * (1.0 + 1e-9) + f64::MIN_POSITIVE
                });
                let hit = bvh.closest(&p, bound).or_else(|| bvh.closest(&p, f64::INFINITY));
                let d = hit.expect("mesh has a non-degenerate face").distance_squared.sqrt();
                out.push(d);
                prev = Some(d);
            }
            out
        })
        .collect();

    let mut stats = BakeStats::default();
    let mut votes = Vec::with_capacity(3);
    for axis in 0..3 {
        let (v, grazing) = axis_votes(&bvh, origin, spacing, dims, axis);
        votes.push(v);
        stats.grazing_rows += grazing;
    }

    let mut disagree = 0usize;
    let mut values = Vec::with_capacity(nx * ny * nz);
    for (row, dist) in rows.iter().enumerate() {
        for (i, &d) in dist.iter().enumerate() {
            let n = i + nx * row;
            let mut inside = 0;
            let mut cast = 0;
            for v in &votes {
                match v[n] {
                    Some(b) => {
                        cast += 1;
                        inside += b as usize;
                    }
                    None => stats.abstentions += 1,
                }
            }
            if inside != 0 && inside != cast {
                disagree += 1;
            }
            values.push(if 2 * inside > cast { -d } else { d } as f32);
        }
    }
    stats.disagreement_rate = disagree as f64 / values.len() as f64;
    if stats.disagreement_rate > WATERTIGHT_WARN {
        log::warn!(
            "sign votes disagree at {:.2}% of lattice points; the mesh is probably not watertight",
            100.0 * stats.disagreement_rate
        );
    }
    Ok((SdfGrid::new(origin, spacing, dims, values)?, stats))
}

/// Inside/outside by crossing parity along `+axis` for every lattice point,
/// indexed like the grid. One ray per lattice row; a row that grazes an
/// edge is re-cast per point with jittered directions. Also returns the
/// number of grazing rows.
fn axis_votes(bvh: &Bvh, origin: Point, spacing: f64, dims: [usize; 3], axis: usize) -> (Vec<Option<bool>>, usize) {
    let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
    let n = dims[axis];
    let mut dir = Vector::zeros();
    dir[axis] = 1.0;
    let index = |t: usize, u: usize, v: usize| {
        let mut ijk = [0; 3];
        ijk[axis] = t;
        ijk[b] = u;
        ijk[c] = v;
        ijk[0] + dims[0] * (ijk[1] + dims[1] * ijk[2])
    };
    let point = |t: usize, u: usize, v: usize| {
        let mut p = origin;
        p[axis] += t as f64 * spacing;
        p[b] += u as f64 * spacing;
        p[c] += v as f64 * spacing;
        p
    };

    let rows: Vec<(Vec<Option<bool>>, bool)> = (0..dims[b] * dims[c])
        .into_par_iter()
        .map(|row| {
            let (u, v) = (row % dims[b], row / dims[b]);
            let mut start = point(0, u, v);
            start[axis] -= spacing;
            let mut hits = Vec::new();
            if bvh.ray_hits(&start, &dir, &mut hits).is_ok() {
                let out = (0..n)
                    .map(|t| {
                        let ti = (t + 1) as f64 * spacing;
                        let beyond = hits.len() - hits.partition_point(|&h| h <= ti);
                        Some(beyond % 2 == 1)
                    })
                    .collect();
                return (out, false);
            }
            let out = (0..n)
                .map(|t| {
                    let p = point(t, u, v);
                    (0..MAX_RECASTS).find_map(|attempt| {
                        let mut r = rng::stream(index(t, u, v) as u64 * 3 + axis as u64, attempt);
                        let jitter = Vector::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
                        let d = dir + jitter * JITTER;
                        bvh.crossings(&p, &d).ok().map(|k| k % 2 == 1)
                    })
                })
                .collect();
            (out, true)
        })
        .collect();

    let mut votes = vec![None; dims[0] * dims[1] * dims[2]];
    let mut grazing = 0;
    for (row, (vals, grazed)) in rows.into_iter().enumerate() {
        let (u, v) = (row % dims[b], row / dims[b]);
        grazing += grazed as usize;
        for (t, val) in vals.into_iter().enumerate() {
            votes[index(t, u, v)] = val;
        }
    }
    (votes, grazing)
}
