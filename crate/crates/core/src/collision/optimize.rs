use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{alignment_terms, beta_schedule, collision_terms, CollisionError, CollisionParams, PoseDelta};
use crate::geometry::kdtree::KdTree;
use crate::geometry::{Point, PointCloud, SimilarityTransform, Vector};
use crate::registration::{find_correspondences_indexed, umeyama_solve, IcpParams};
use crate::sdf::DistanceField;

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 20;
const STALL_STAGES: usize = 5;
/// Per-step caps on the rotation increment (radians) and log-scale.
const MAX_ROTATION_STEP: f64 = 0.5;
const MAX_LOG_SCALE_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub k: usize,
    pub beta: f64,
    pub align_term: f64,
    pub collision_term: f64,
    pub total: f64,
    pub max_penetration: f64,
    /// Objective at the start of the stage with this stage's pairs and β.
    pub stage_start: f64,
    pub steps_taken: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<StageRecord>,
    pub final_transform: SimilarityTransform,
    pub converged: bool,
}

impl OptimizationTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,beta,align_term,col_term,total,max_penetration\n");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.k, r.beta, r.align_term, r.collision_term, r.total, r.max_penetration
            );
        }
        s
    }

    pub fn last(&self) -> Option<&StageRecord> {
        self.records.last()
    }
}

/// The objective for one stage: pairs and β are fixed. Works on points
/// re-centred at their centroid so rotation steps do not swing them about
/// a distant origin.
struct Stage<'a> {
    field: &'a dyn DistanceField,
    points: &'a [Point],
    paired: Vec<Point>,
    targets: Vec<Point>,
    beta: f64,
    epsilon: f64,
    lambda: f64,
}

struct Eval {
    align: f64,
    collision: f64,
    total: f64,
    gradient: [f64; 7],
    curvature: [f64; 7],
    max_penetration: f64,
}

impl Stage<'_> {
    fn eval(&self, t: &SimilarityTransform) -> Eval {
        let a = alignment_terms(&self.paired, &self.targets, t);
        let c = collision_terms(self.field, self.points, t, self.epsilon, self.lambda);
        let mut gradient = a.gradient;
        let mut curvature = a.curvature;
        for i in 0..7 {
            gradient[i] += self.beta * c.gradient[i];
            curvature[i] += self.beta * c.curvature[i];
        }
        Eval {
            align: a.value,
            collision: c.value,
            total: a.value + self.beta * c.value,
            gradient,
            curvature,
            max_penetration: c.max_penetration,
        }
    }

    fn value(&self, t: &SimilarityTransform) -> f64 {
        let a = alignment_terms(&self.paired, &self.targets, t);
        let c = collision_terms(self.field, self.points, t, self.epsilon, self.lambda);
        a.value + self.beta * c.value
    }

    /// One preconditioned descent step with Armijo backtracking. Returns
    /// `None` when no decrease can be found.
    fn step(&self, t: &SimilarityTransform, e: &Eval, initial: f64) -> Option<(SimilarityTransform, f64)> {
        let mut d = [0.0; 7];
        for i in 0..7 {
            d[i] = -e.gradient[i] / (e.curvature[i] + 1e-12);
        }
        let slope: f64 = d.iter().zip(&e.gradient).map(|(a, b)| a * b).sum();
        if !(slope < -1e-14 * (1.0 + e.total.abs())) {
            return None;
        }
        let rot = Vector::new(d[1], d[2], d[3]).norm();
        let mut alpha = initial;
        if rot * alpha > MAX_ROTATION_STEP {
            alpha = MAX_ROTATION_STEP / rot;
        }
        if d[0].abs() * alpha > MAX_LOG_SCALE_STEP {
            alpha = MAX_LOG_SCALE_STEP / d[0].abs();
        }
        for _ in 0..=MAX_HALVINGS {
            let delta = PoseDelta::from_array(d.map(|x| x * alpha));
            let cand = delta.apply(t);
            let f = self.value(&cand);
            if f.is_finite() && f <= e.total + ARMIJO_C * alpha * slope {
                return Some((cand, f));
            }
            alpha *= 0.5;
        }
        None
    }
}

/// Staged minimisation of `Σ‖θ(p) − p′‖² + β⁽ᵏ⁾·L_col(θ)`.
///
/// Each stage re-selects `p′` by nearest neighbour in the guidance cloud,
/// tries the closed-form similarity fit to those pairs (kept only if it
/// lowers the stage objective), then takes up to `inner_steps`
/// line-searched descent steps.
pub fn optimize_placement(
    remain_points: &PointCloud,
    guidance_points: &PointCloud,
    field: &dyn DistanceField,
    init: &SimilarityTransform,
    params: &CollisionParams,
    icp_params: &IcpParams,
) -> Result<OptimizationTrace, CollisionError> {
    params.validate()?;
    icp_params.validate()?;
    let epsilon = params.epsilon_or_err()?;
    if remain_points.is_empty() || guidance_points.is_empty() {
        return Err(CollisionError::EmptyCloud);
    }

    let c = remain_points.centroid();
    let centred: Vec<Point> = remain_points.points.iter().map(|p| Point::from(p - c)).collect();
    let to_centred = |t: &SimilarityTransform| SimilarityTransform::new(t.scale, t.rotation, t.apply(&c).coords);
    let from_centred = |t: &SimilarityTransform| {
        SimilarityTransform::new(t.scale, t.rotation, t.translation - t.apply_vector(&c.coords))
    };

    let tree = KdTree::new(&guidance_points.points);
    let mut pose = to_centred(init);
    let mut records = Vec::with_capacity(params.k_max);
    let mut stalled = 0;
    let mut converged = false;
    let mut moved = Vec::with_capacity(centred.len());

    for k in 0..params.k_max {
        let beta = beta_schedule(k, params.k_max, params.beta_max)?;
        moved.clear();
        moved.extend(centred.iter().map(|p| pose.apply(p)));
        let corr = find_correspondences_indexed(&moved, &tree, icp_params)?;
        let stage = Stage {
            field,
            points: &centred,
            paired: corr.pairs.iter().map(|&(i, _)| centred[i]).collect(),
            targets: corr.pairs.iter().map(|&(_, j)| guidance_points.points[j]).collect(),
            beta,
            epsilon,
            lambda: params.lambda,
        };

        let mut e = stage.eval(&pose);
        if !e.total.is_finite() {
            return Err(CollisionError::Diverged(k));
        }
        let stage_start = e.total;
        let mut steps = 0;
        if params.inner_steps > 0 {
            if let Ok(fit) = umeyama_solve(&stage.paired, &stage.targets, None, true) {
                let f = stage.value(&fit);
                if f.is_finite() && f < e.total {
                    pose = fit;
                    e = stage.eval(&pose);
                }
            }
            for _ in 0..params.inner_steps {
                let Some((next, f)) = stage.step(&pose, &e, params.initial_step) else { break };
                debug_assert!(f <= e.total);
                pose = next;
                e = stage.eval(&pose);
                steps += 1;
            }
        }
        if !e.total.is_finite() || !pose.is_finite() {
            return Err(CollisionError::Diverged(k));
        }

        let record = StageRecord {
            k,
            beta,
            align_term: e.align,
            collision_term: e.collision,
            total: e.total,
            max_penetration: e.max_penetration,
            stage_start,
            steps_taken: steps,
        };
        if let Some(prev) = records.last().map(|r: &StageRecord| r.total) {
            let change = (record.total - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            stalled = if change < params.convergence_tol { stalled + 1 } else { 0 };
        }
        records.push(record);
        if stalled >= STALL_STAGES && record.max_penetration < epsilon {
            converged = true;
            break;
        }
    }

    Ok(OptimizationTrace { records, final_transform: from_centred(&pose), converged })
}
