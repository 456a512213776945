//! Coarse global registration. The default registrar matches
//! sign-invariant point-pair-feature histograms and runs sample consensus
//! over three-point similarity hypotheses.

use std::io::Write;
use std::process::{Command, Stdio};

use nalgebra::{Matrix3, Rotation3, SymmetricEigen, UnitQuaternion};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{umeyama_solve, RegistrationError};
use crate::geometry::kdtree::KdTree;
use crate::geometry::{Point, PointCloud, SimilarityTransform, Vector};
use crate::rng;

/// Minimum cloud size the feature-based registrar accepts.
pub const MIN_POINTS: usize = 100;
const BINS: usize = 11;
const DESC_LEN: usize = 3 * BINS;
/// Source points used to score raw hypotheses.
const PROBE_POINTS: usize = 200;
/// Inlier gates, in multiples of the inlier threshold, for the rounds that
/// polish each candidate.
const REFINE_SCHEDULE: [f64; 8] = [4.0, 4.0, 2.0, 2.0, 1.0, 1.0, 1.0, 1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseEstimate {
    pub transform: SimilarityTransform,
    pub inliers: usize,
    pub inlier_ratio: f64,
}

/// Pluggable coarse registration: an initial source→target similarity.
/// `scale_hint` is the OBB-based target/source size ratio.
pub trait CoarseRegistrar: Send + Sync {
    fn id(&self) -> String;

    fn register(
        &self,
        source: &PointCloud,
        target: &PointCloud,
        scale_hint: f64,
        seed: u64,
    ) -> Result<CoarseEstimate, RegistrationError>;
}

/// Resolves `"ppf-ransac"` or `"external:<command>"`.
pub fn registrar_from_id(id: &str) -> Result<Box<dyn CoarseRegistrar>, RegistrationError> {
    if id == "ppf-ransac" {
        return Ok(Box::new(PpfRansac::default()));
    }
    if let Some(cmd) = id.strip_prefix("external:") {
        return Ok(Box::new(ExternalRegistrar::new(cmd)?));
    }
    Err(RegistrationError::InvalidParams(format!("unknown registrar '{id}'")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpfRansacParams {
    /// Descriptor support radius as a fraction of the target diagonal.
    pub feature_radius: f64,
    /// Inlier distance as a fraction of the target diagonal.
    pub inlier_threshold: f64,
    pub iterations: usize,
    /// Clouds are thinned to at most this many points.
    pub max_points: usize,
    pub normal_k: usize,
    pub min_inliers: usize,
    /// Accepted hypothesis scale relative to the hint.
    pub scale_range: (f64, f64),
    pub low_confidence_ratio: f64,
}

impl Default for PpfRansacParams {
    fn default() -> Self {
        Self {
            feature_radius: 0.25,
            inlier_threshold: 0.025,
            iterations: 50_000,
            max_points: 2500,
            normal_k: 16,
            min_inliers: 10,
            scale_range: (0.67, 1.5),
            low_confidence_ratio: 0.2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PpfRansac {
    pub params: PpfRansacParams,
}

struct Features {
    points: Vec<Point>,
    descriptors: Vec<[f32; DESC_LEN]>,
}

fn thin(points: &[Point], max: usize) -> Vec<Point> {
    if points.len() <= max {
        return points.to_vec();
    }
    let step = points.len() as f64 / max as f64;
    (0..max).map(|i| points[(i as f64 * step) as usize]).collect()
}

fn normals(points: &[Point], tree: &KdTree, k: usize) -> Vec<Vector> {
    points
        .par_iter()
        .map(|p| {
            let nn = tree.k_nearest(p, k.min(points.len()));
            let mut mean = Vector::zeros();
            for &(i, _) in &nn {
                mean += points[i].coords;
            }
            mean /= nn.len() as f64;
            let mut cov = Matrix3::zeros();
            for &(i, _) in &nn {
                let d = points[i].coords - mean;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            eig.eigenvectors.column(eig.eigenvalues.imin()).into_owned()
        })
        .collect()
}

fn bin(x: f64) -> usize {
    ((x.clamp(0.0, 1.0) * BINS as f64) as usize).min(BINS - 1)
}

fn describe(points: Vec<Point>, radius: f64, k: usize) -> Features {
    let tree = KdTree::new(&points);
    let normals = normals(&points, &tree, k);
    let neighbours: Vec<Vec<usize>> = points
        .par_iter()
        .map(|p| {
            let mut out = Vec::new();
            tree.within(p, radius, &mut out);
            out
        })
        .collect();

    let spfh: Vec<[f64; DESC_LEN]> = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut h = [0.0; DESC_LEN];
            let mut count = 0.0;
            for &j in &neighbours[i] {
                let d = points[j] - points[i];
                let len = d.norm();
                if j == i || len == 0.0 {
                    continue;
                }
                let d = d / len;
                let a = normals[i].dot(&d).abs();
                let b = normals[j].dot(&d).abs();
                h[bin(a.min(b))] += 1.0;
                h[BINS + bin(a.max(b))] += 1.0;
                h[2 * BINS + bin(normals[i].dot(&normals[j]).abs())] += 1.0;
                count += 1.0;
            }
            if count > 0.0 {
                h.iter_mut().for_each(|x| *x /= count);
            }
            h
        })
        .collect();

    let descriptors = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = spfh[i];
            let nb = &neighbours[i];
            if nb.len() > 1 {
                let w = 1.0 / (nb.len() - 1) as f64;
                for &j in nb.iter().filter(|&&j| j != i) {
                    for (a, b) in acc.iter_mut().zip(&spfh[j]) {
                        *a += w * b;
                    }
                }
            }
            let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            let mut out = [0f32; DESC_LEN];
            for (o, a) in out.iter_mut().zip(&acc) {
                *o = (a / norm) as f32;
            }
            out
        })
        .collect();

    Features { points, descriptors }
}

fn descriptor_distance(a: &[f32; DESC_LEN], b: &[f32; DESC_LEN]) -> f32 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest_descriptor(d: &[f32; DESC_LEN], pool: &[[f32; DESC_LEN]]) -> usize {
    let mut best = (f32::INFINITY, 0);
    for (j, c) in pool.iter().enumerate() {
        let dist = descriptor_distance(d, c);
        if dist < best.0 {
            best = (dist, j);
        }
    }
    best.1
}

fn principal_frame(points: &[Point]) -> (Point, Matrix3<f64>) {
    let n = points.len() as f64;
    let c = Point::from(points.iter().fold(Vector::zeros(), |a, p| a + p.coords) / n);
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = Matrix3::from_columns(&order.map(|i| eig.eigenvectors.column(i).into_owned()));
    if axes.determinant() < 0.0 {
        axes.set_column(2, &-axes.column(2));
    }
    (c, axes)
}

/// The 24 proper rotations taking the source principal frame onto the
/// target's, with centroids matched and unit scale.
fn principal_axis_candidates(src: &[Point], tgt: &[Point]) -> Vec<SimilarityTransform> {
    let (cs, bs) = principal_frame(src);
    let (ct, bt) = principal_frame(tgt);
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(24);
    for perm in perms {
        for signs in 0..8u8 {
            let mut d = Matrix3::zeros();
            for (row, &col) in perm.iter().enumerate() {
                d[(row, col)] = if signs >> row & 1 == 1 { -1.0 } else { 1.0 };
            }
            if d.determinant() < 0.0 {
                continue;
            }
            let r = bt * d * bs.transpose();
            let t = ct.coords - r * cs.coords;
            out.push(SimilarityTransform::from_matrix(1.0, &r, t));
        }
    }
    out
}

impl PpfRansac {
    pub fn new(params: PpfRansacParams) -> Self {
        Self { params }
    }

    fn putative_matches(&self, src: &Features, tgt: &Features) -> Vec<(usize, usize)> {
        let forward: Vec<(usize, usize)> = (0..src.points.len())
            .into_par_iter()
            .map(|i| (i, nearest_descriptor(&src.descriptors[i], &tgt.descriptors)))
            .collect();
        let mutual: Vec<(usize, usize)> = forward
            .par_iter()
            .filter(|&&(i, j)| nearest_descriptor(&tgt.descriptors[j], &src.descriptors) == i)
            .copied()
            .collect();
        if mutual.len() >= 30 {
            mutual
        } else {
            forward
        }
    }

    fn full_inliers(&self, t: &SimilarityTransform, src: &[Point], tree: &KdTree, thr2: f64) -> Vec<(usize, usize)> {
        src.iter()
            .enumerate()
            .filter_map(|(i, p)| {
                let (j, d2) = tree.nearest(&t.apply(p))?;
                (d2 <= thr2).then_some((i, j))
            })
            .collect()
    }
}

impl CoarseRegistrar for PpfRansac {
    fn id(&self) -> String {
        "ppf-ransac".into()
    }

    fn register(
        &self,
        source: &PointCloud,
        target: &PointCloud,
        scale_hint: f64,
        seed: u64,
    ) -> Result<CoarseEstimate, RegistrationError> {
        let p = &self.params;
        for c in [source, target] {
            if c.len() < MIN_POINTS {
                return Err(RegistrationError::RegistrationFailed(format!(
                    "cloud has {} points, need at least {MIN_POINTS}",
                    c.len()
                )));
            }
        }
        if !(scale_hint > 0.0 && scale_hint.is_finite()) {
            return Err(RegistrationError::InvalidParams(format!("scale hint {scale_hint}")));
        }

        let diag = target.aabb().diagonal();
        let radius = p.feature_radius * diag;
        let thr = p.inlier_threshold * diag;
        let pre = SimilarityTransform::new(scale_hint, UnitQuaternion::identity(), Vector::zeros());
        let src_pts: Vec<Point> = thin(&source.points, p.max_points).iter().map(|x| pre.apply(x)).collect();
        let src = describe(src_pts, radius, p.normal_k);
        let tgt = describe(thin(&target.points, p.max_points), radius, p.normal_k);
        let tgt_tree = KdTree::new(&tgt.points);

        let matches = self.putative_matches(&src, &tgt);
        if matches.len() < 3 {
            return Err(RegistrationError::RegistrationFailed("too few descriptor matches".into()));
        }
        let (lo, hi) = p.scale_range;
        let min_edge = 2.0 * thr;
        let thr2 = thr * thr;

        let mut r = rng::stream(seed, 0xC0A7);
        let mut top: Vec<(usize, SimilarityTransform)> = Vec::new();
        const KEEP: usize = 16;
        let probe = thin(&src.points, PROBE_POINTS);
        let probe_gate2 = 4.0 * thr2;
        for _ in 0..p.iterations {
            let a = r.gen_range(0..matches.len());
            let b = r.gen_range(0..matches.len());
            let c = r.gen_range(0..matches.len());
            if a == b || b == c || a == c {
                continue;
            }
            let ps = [src.points[matches[a].0], src.points[matches[b].0], src.points[matches[c].0]];
            let qs = [tgt.points[matches[a].1], tgt.points[matches[b].1], tgt.points[matches[c].1]];
            let mut ratios = [0.0; 3];
            let mut ok = true;
            for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                let ep = (ps[i] - ps[j]).norm();
                let eq = (qs[i] - qs[j]).norm();
                if ep < min_edge || eq < min_edge {
                    ok = false;
                    break;
                }
                ratios[k] = eq / ep;
            }
            if !ok {
                continue;
            }
            let rmin = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let rmax = ratios.iter().cloned().fold(0.0, f64::max);
            if rmin < lo || rmax > hi || rmax > 1.15 * rmin {
                continue;
            }
            let Ok(t) = umeyama_solve(&ps, &qs, None, true) else { continue };
            if !(lo..=hi).contains(&t.scale) {
                continue;
            }
            let support = matches
                .iter()
                .filter(|&&(i, j)| (t.apply(&src.points[i]) - tgt.points[j]).norm_squared() <= thr2)
                .take(3)
                .count();
            if support < 3 {
                continue;
            }
            // Rank by geometric agreement of a fixed probe subset rather than
            // by descriptor matches, which favour symmetric flips.
            let count = probe
                .iter()
                .filter(|p| tgt_tree.nearest(&t.apply(p)).is_some_and(|(_, d2)| d2 <= probe_gate2))
                .count();
            if top.len() == KEEP && count <= top[KEEP - 1].0 {
                continue;
            }
            let dup = top.iter().position(|(_, h)| {
                h.rotation_angle_to(&t) < 0.1 && (h.translation - t.translation).norm() < thr
            });
            match dup {
                Some(k) if top[k].0 >= count => continue,
                Some(k) => {
                    top.remove(k);
                }
                None => {}
            }
            let at = top.partition_point(|(c, _)| *c >= count);
            top.insert(at, (count, t));
            top.truncate(KEEP);
        }
        if top.is_empty() {
            return Err(RegistrationError::RegistrationFailed("no consistent hypothesis".into()));
        }

        // Principal-axis alignments join the consensus hypotheses, so a
        // symmetric shape whose RANSAC winners are all flipped still gets a
        // candidate near the true pose.
        let mut candidates: Vec<SimilarityTransform> = top.into_iter().map(|(_, t)| t).collect();
        candidates.extend(principal_axis_candidates(&src.points, &tgt.points));

        let mut best: Option<(usize, SimilarityTransform)> = None;
        for mut t in candidates {
            for factor in REFINE_SCHEDULE {
                let gate = factor * thr;
                let inl = self.full_inliers(&t, &src.points, &tgt_tree, gate * gate);
                if inl.len() < 3 {
                    break;
                }
                let a: Vec<Point> = inl.iter().map(|&(i, _)| src.points[i]).collect();
                let b: Vec<Point> = inl.iter().map(|&(_, j)| tgt.points[j]).collect();
                match umeyama_solve(&a, &b, None, true) {
                    Ok(next) if (lo..=hi).contains(&next.scale) => t = next,
                    _ => break,
                }
            }
            let count = self.full_inliers(&t, &src.points, &tgt_tree, thr2).len();
            if best.as_ref().map_or(true, |(c, _)| count > *c) {
                best = Some((count, t));
            }
        }
        let (inliers, t) = best.expect("non-empty");
        if inliers < p.min_inliers {
            return Err(RegistrationError::RegistrationFailed(format!("only {inliers} inliers")));
        }
        let inlier_ratio = inliers as f64 / src.points.len() as f64;
        if inlier_ratio < p.low_confidence_ratio {
            log::warn!("coarse registration has low confidence (inlier ratio {inlier_ratio:.3})");
        }
        Ok(CoarseEstimate { transform: t.compose(&pre), inliers, inlier_ratio })
    }
}

/// Delegates coarse registration to a subprocess.
///
/// stdin: a line `n_src n_tgt`, then the source and target points as
/// `x y z` lines. stdout: three lines of `r r r t` followed by a scale line.
#[derive(Debug, Clone)]
pub struct ExternalRegistrar {
    program: String,
    args: Vec<String>,
}

impl ExternalRegistrar {
    pub fn new(command: &str) -> Result<Self, RegistrationError> {
        let mut parts = command.split_whitespace().map(str::to_owned);
        let program = parts
            .next()
            .ok_or_else(|| RegistrationError::InvalidParams("empty external registrar command".into()))?;
        Ok(Self { program, args: parts.collect() })
    }
}

fn parse_external(out: &str) -> Result<SimilarityTransform, RegistrationError> {
    let bad = |m: &str| RegistrationError::External(format!("malformed output: {m}"));
    let rows: Vec<Vec<f64>> = out
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::parse::<f64>).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()
        .map_err(|e| bad(&e.to_string()))?;
    if rows.len() != 4 || rows[..3].iter().any(|r| r.len() != 4) || rows[3].len() != 1 {
        return Err(bad("expected three rows of four numbers and a scale line"));
    }
    let m = Matrix3::from_fn(|i, j| rows[i][j]);
    let t = Vector::new(rows[0][3], rows[1][3], rows[2][3]);
    let scale = rows[3][0];
    if !(scale > 0.0 && scale.is_finite()) || !m.iter().chain(t.iter()).all(|x| x.is_finite()) {
        return Err(bad("non-finite values or non-positive scale"));
    }
    if m.determinant() <= 0.0 {
        return Err(bad("rotation block is not a proper rotation"));
    }
    let rot = Rotation3::from_matrix(&m);
    Ok(SimilarityTransform::new(scale, UnitQuaternion::from_rotation_matrix(&rot), t))
}

impl CoarseRegistrar for ExternalRegistrar {
    fn id(&self) -> String {
        let mut s = format!("external:{}", self.program);
        for a in &self.args {
            s.push(' ');
            s.push_str(a);
        }
        s
    }

    fn register(
        &self,
        source: &PointCloud,
        target: &PointCloud,
        _scale_hint: f64,
        _seed: u64,
    ) -> Result<CoarseEstimate, RegistrationError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| RegistrationError::External(format!("cannot start {}: {e}", self.program)))?;
        let mut input = format!("{} {}\n", source.len(), target.len());
        for p in source.points.iter().chain(&target.points) {
            input.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
        }
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            // A registrar may exit without reading everything; its output decides.
            let _ = stdin.write_all(input.as_bytes());
        }
        let out = child
            .wait_with_output()
            .map_err(|e| RegistrationError::External(e.to_string()))?;
        if !out.status.success() {
            return Err(RegistrationError::External(format!("exited with {}", out.status)));
        }
        let transform = parse_external(&String::from_utf8_lossy(&out.stdout))?;
        Ok(CoarseEstimate { transform, inliers: 0, inlier_ratio: 0.0 })
    }
}
