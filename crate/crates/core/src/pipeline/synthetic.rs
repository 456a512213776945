//! Synthetic scenes with known ground truth: primitive compound assets and
//! guidance meshes produced by random similarity transforms, optionally
//! degraded.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{ObjectSpec, SceneParams, SceneSpec};
use super::PipelineError;
use crate::geometry::io::save_obj;
use crate::geometry::{primitives, Point, SimilarityTransform, TriangleMesh, Vector};
use crate::metrics::volume_intersection_ratio;
use crate::rng::{derive_seed, stream};

/// Share of faces removed by [`SyntheticKind::Holes`].
pub const HOLE_FRACTION: f64 = 0.25;
/// Share of faces kept by [`SyntheticKind::Occluded`].
pub const CROP_FRACTION: f64 = 0.4;
/// Target volume intersection ratio for [`SyntheticKind::Colliding`].
pub const COLLIDING_OVERLAP: f64 = 0.30;
const OVERLAP_SAMPLES: usize = 50_000;
const HOLE_CENTRES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticKind {
    /// Guidance is an exact transformed copy of each asset.
    Clean,
    /// A quarter of each guidance mesh's faces is cut away around a few centres.
    Holes,
    /// Each guidance mesh keeps only 40% of its faces, cut by a half-space.
    Occluded,
    /// Consecutive objects overlap with a volume ratio near 0.3 in the
    /// ground-truth layout.
    Colliding,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [Self::Clean, Self::Holes, Self::Occluded, Self::Colliding];

    pub fn name(self) -> &'static str {
        match self {
            Self::Clean => "clean",
            Self::Holes => "holes",
            Self::Occluded => "occluded",
            Self::Colliding => "colliding",
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown synthetic kind '{s}' (expected clean, holes, occluded or colliding)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub id: String,
    /// Maps the asset into the guidance frame.
    pub transform: SimilarityTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub kind: SyntheticKind,
    pub seed: u64,
    /// Scene-wide transform applied on top of the layout.
    pub global: SimilarityTransform,
    pub objects: Vec<GroundTruthObject>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub spec: SceneSpec,
    pub spec_path: PathBuf,
    pub ground_truth: GroundTruth,
    pub assets: Vec<TriangleMesh>,
    pub guidance: Vec<TriangleMesh>,
}

impl SyntheticCase {
    pub fn transform(&self, index: usize) -> &SimilarityTransform {
        &self.ground_truth.objects[index].transform
    }
}

/// Uniformly distributed rotation.
pub fn random_rotation(rng: &mut impl Rng) -> UnitQuaternion<f64> {
    // Shoemake's subgroup algorithm.
    let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t2, t3) = (std::f64::consts::TAU * u2, std::f64::consts::TAU * u3);
    UnitQuaternion::from_quaternion(Quaternion::new(b * t3.cos(), a * t2.sin(), a * t2.cos(), b * t3.sin()))
}

/// Uniformly distributed direction.
pub fn random_unit_vector(rng: &mut impl Rng) -> Vector {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vector::new(r * phi.cos(), r * phi.sin(), z)
}

/// A subdivided box with four separate spheres and cylinders of distinct
/// sizes beside its side walls, centred on its bounding box. The parts sit
/// at off-centre positions, so no box symmetry maps the compound onto
/// itself and most half-space crops still see one of them.
pub fn compound_asset(rng: &mut impl Rng) -> TriangleMesh {
    let half = Vector::new(rng.gen_range(0.35..0.6), rng.gen_range(0.2..0.35), rng.gen_range(0.12..0.25));
    let base = rng.gen_range(0.1..0.14);
    let gap = 0.06;
    let h = half;
    let mut parts = vec![primitives::subdivided_box(half, 8)];
    // (radius factor, sphere?, outward axis, side, position on the wall)
    let layout = [
        (1.6, true, 0, 1.0, [0.0, 0.5, 0.3]),
        (1.2, false, 0, -1.0, [0.0, 0.4, -0.2]),
        (1.0, true, 1, -1.0, [-0.5, 0.0, 0.2]),
        (0.8, false, 1, 1.0, [0.25, 0.0, -0.3]),
    ];
    for (factor, sphere, axis, side, pos) in layout {
        let r = factor * base;
        let mesh = if sphere {
            primitives::icosphere(r, 2)
        } else {
            primitives::cylinder(r, (1.5 * r).min(h.z), 20, 4)
        };
        let mut c = Vector::new(pos[0] * h.x, pos[1] * h.y, pos[2] * h.z);
        c[axis] = side * (h[axis] + gap + r);
        parts.push(mesh.transformed(&SimilarityTransform::new(1.0, UnitQuaternion::identity(), c)));
    }
    let merged = TriangleMesh::merge(&parts);
    let c = merged.aabb().center();
    merged.transformed(&SimilarityTransform::new(1.0, UnitQuaternion::identity(), -c.coords))
}

fn centroids(mesh: &TriangleMesh) -> Vec<Point> {
    mesh.triangles().map(|[a, b, c]| Point::from((a.coords + b.coords + c.coords) / 3.0)).collect()
}

/// Faces ordered by `key`, ties by index, with the first `count` dropped or kept.
fn rank_faces(keys: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
    idx
}

/// Removes `round(HOLE_FRACTION · F)` faces closest to a few random face
/// centroids.
pub fn punch_holes(mesh: &TriangleMesh, rng: &mut impl Rng) -> TriangleMesh {
    let cents = centroids(mesh);
    let centres: Vec<Point> = (0..HOLE_CENTRES).map(|_| cents[rng.gen_range(0..cents.len())]).collect();
    let keys: Vec<f64> =
        cents.iter().map(|p| centres.iter().map(|c| (p - c).norm_squared()).fold(f64::INFINITY, f64::min)).collect();
    let remove = (HOLE_FRACTION * mesh.num_faces() as f64).round() as usize;
    let mut keep = rank_faces(&keys).split_off(remove);
    keep.sort_unstable();
    mesh.subset(&keep)
}

/// Keeps the `round(CROP_FRACTION · F)` faces lying furthest along a random
/// direction's negative side.
pub fn half_space_crop(mesh: &TriangleMesh, rng: &mut impl Rng) -> TriangleMesh {
    let d = random_unit_vector(rng);
    let keys: Vec<f64> = centroids(mesh).iter().map(|p| p.coords.dot(&d)).collect();
    let count = (CROP_FRACTION * mesh.num_faces() as f64).round() as usize;
    let mut keep = rank_faces(&keys);
    keep.truncate(count);
    keep.sort_unstable();
    mesh.subset(&keep)
}

fn translation(v: Vector) -> SimilarityTransform {
    SimilarityTransform::new(1.0, UnitQuaternion::identity(), v)
}

fn bounding_radius(mesh: &TriangleMesh) -> f64 {
    let c = mesh.aabb().center();
    mesh.vertices().iter().map(|p| (p - c).norm()).fold(0.0, f64::max)
}

/// Offset along +x that makes the volume ratio of `a` and `b` (placed at
/// that offset) close to [`COLLIDING_OVERLAP`]. `None` when even full
/// overlap falls short.
fn colliding_offset(a: &TriangleMesh, b: &TriangleMesh, seed: u64) -> Result<Option<f64>, PipelineError> {
    let ratio = |x: f64| -> Result<f64, PipelineError> {
        volume_intersection_ratio(a, &b.transformed(&translation(Vector::new(x, 0.0, 0.0))), OVERLAP_SAMPLES, seed)
            .map_err(|source| PipelineError::Metrics { a: "synthetic".into(), b: "synthetic".into(), source })
    };
    let ca = a.aabb().center().x;
    let cb = b.aabb().center().x;
    let (mut lo, mut hi) = (ca - cb, ca - cb + bounding_radius(a) + bounding_radius(b));
    if ratio(lo)? < COLLIDING_OVERLAP {
        return Ok(None);
    }
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        let r = ratio(mid)?;
        if (r - COLLIDING_OVERLAP).abs() < 0.005 {
            return Ok(Some(mid));
        }
        if r > COLLIDING_OVERLAP {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Lays out `count` objects in the scene frame. Returns each asset (in its
/// own frame) with its layout transform.
fn layout(
    kind: SyntheticKind,
    count: usize,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(TriangleMesh, SimilarityTransform)>, PipelineError> {
    let mut out: Vec<(TriangleMesh, SimilarityTransform)> = Vec::with_capacity(count);
    let mut cursor = 0.0;
    for i in 0..count {
        let mut attempt = 0u64;
        loop {
            let asset = compound_asset(rng);
            let local = SimilarityTransform::new(rng.gen_range(0.8..1.25), random_rotation(rng), Vector::zeros());
            let placed = asset.transformed(&local);
            let r = bounding_radius(&placed);
            let shift = match (kind, out.last()) {
                (SyntheticKind::Colliding, Some((prev, prev_t))) => {
                    let prev_world = prev.transformed(prev_t);
                    let tag = derive_seed(seed, 0x0C01 + ((i as u64) << 8) + attempt);
                    match colliding_offset(&prev_world, &placed, tag)? {
                        Some(x) => Vector::new(x, 0.0, 0.0),
                        None => {
                            attempt += 1;
                            continue;
                        }
                    }
                }
                (_, None) => Vector::zeros(),
                (_, Some(_)) => Vector::new(cursor + 0.15 * r + r, 0.0, 0.0),
            };
            let t = translation(shift).compose(&local);
            cursor = shift.x + r;
            out.push((asset, t));
            break;
        }
    }
    Ok(out)
}

/// [`generate_synthetic_scene`] with two objects.
pub fn generate_synthetic_case(kind: SyntheticKind, seed: u64, out_dir: &Path) -> Result<SyntheticCase, PipelineError> {
    generate_synthetic_scene(kind, seed, 2, out_dir)
}

/// Writes assets, guidance meshes, `scene.json` and `ground_truth.json` to
/// `out_dir`. Identical arguments give identical files.
pub fn generate_synthetic_scene(
    kind: SyntheticKind,
    seed: u64,
    count: usize,
    out_dir: &Path,
) -> Result<SyntheticCase, PipelineError> {
    if count < 2 {
        return Err(PipelineError::InvalidScene(format!("need at least 2 objects, got {count}")));
    }
    let mut rng = stream(seed, 0x5E7);
    let placed = layout(kind, count, seed, &mut rng)?;

    let scene_box = placed
        .iter()
        .map(|(m, t)| m.transformed(t).aabb())
        .reduce(|a, b| a.union(&b))
        .expect("at least two objects");
    let diag = scene_box.diagonal();
    let recentre = translation(-scene_box.center().coords);
    let global = SimilarityTransform::new(
        rng.gen_range(0.5..=2.0),
        random_rotation(&mut rng),
        random_unit_vector(&mut rng) * rng.gen_range(0.0..=diag),
    )
    .compose(&recentre);

    let io_err = |path: &Path, e: std::io::Error| PipelineError::Io { path: path.into(), source: e };
    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut objects = Vec::with_capacity(count);
    let mut truth = Vec::with_capacity(count);
    let mut assets = Vec::with_capacity(count);
    let mut guidance = Vec::with_capacity(count);
    for (i, (asset, local)) in placed.into_iter().enumerate() {
        let id = format!("part{i}");
        let gt = global.compose(&local);
        let degraded = match kind {
            SyntheticKind::Holes => punch_holes(&asset, &mut rng),
            SyntheticKind::Occluded => half_space_crop(&asset, &mut rng),
            SyntheticKind::Clean | SyntheticKind::Colliding => asset.clone(),
        };
        let guide = degraded.transformed(&gt);
        let (asset_name, guide_name) = (format!("asset_{id}.obj"), format!("guidance_{id}.obj"));
        for (mesh, name) in [(&asset, &asset_name), (&guide, &guide_name)] {
            let path = out_dir.join(name);
            save_obj(mesh, &path).map_err(|e| PipelineError::object(&id, super::PipelineStage::LoadAsset, e))?;
        }
        objects.push(ObjectSpec {
            id: id.clone(),
            asset_mesh_path: asset_name.into(),
            guidance_mesh_path: guide_name.into(),
            anchor_hint: None,
        });
        truth.push(GroundTruthObject { id, transform: gt });
        assets.push(asset);
        guidance.push(guide);
    }

    let spec = SceneSpec {
        objects,
        params: SceneParams { seed, ..SceneParams::default() },
        refinement: Default::default(),
        base_dir: out_dir.to_path_buf(),
    };
    let spec_path = out_dir.join("scene.json");
    spec.save(&spec_path)?;
    let ground_truth = GroundTruth { kind, seed, global, objects: truth };
    let gt_path = out_dir.join("ground_truth.json");
    std::fs::write(&gt_path, serde_json::to_string_pretty(&ground_truth)? + "\n").map_err(|e| io_err(&gt_path, e))?;
    Ok(SyntheticCase { spec, spec_path, ground_truth, assets, guidance })
}
