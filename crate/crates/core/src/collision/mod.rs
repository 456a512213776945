//! Collision-aware placement: the penetration loss against a distance
//! field, the annealed alignment-plus-collision objective and the staged
//! optimizer that minimises it.

mod optimize;

use nalgebra::UnitQuaternion;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, PointCloud, SimilarityTransform, Vector};
use crate::registration::RegistrationError;
use crate::sdf::DistanceField;

pub use optimize::{optimize_placement, OptimizationTrace, StageRecord};

/// Points per partial sum. Reductions always combine chunks in order, so
/// results do not depend on the thread count.
const CHUNK: usize = 1024;

#[derive(Debug, Error)]
pub enum CollisionError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("points and targets differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("stage {k} outside 0..={k_max}")]
    StageOutOfRange { k: usize, k_max: usize },
    #[error("objective diverged at stage {0}")]
    Diverged(usize),
    #[error(transparent)]
    Registration(#[from] RegistrationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionParams {
    /// Safety margin. `None` means 0.005 × the anchor's bounding-box
    /// diagonal, filled in by [`CollisionParams::resolved`].
    pub epsilon: Option<f64>,
    pub lambda: f64,
    pub beta_max: f64,
    pub k_max: usize,
    pub inner_steps: usize,
    pub initial_step: f64,
    pub convergence_tol: f64,
}

impl Default for CollisionParams {
    fn default() -> Self {
        Self {
            epsilon: None,
            lambda: 0.003,
            beta_max: 3.0,
            k_max: 100,
            inner_steps: 10,
            initial_step: 1.0,
            convergence_tol: 1e-6,
        }
    }
}

pub const EPSILON_FRACTION: f64 = 0.005;

impl CollisionParams {
    /// Copy with a concrete epsilon for an anchor of the given diagonal.
    pub fn resolved(&self, anchor_diagonal: f64) -> Self {
        Self { epsilon: Some(self.epsilon.unwrap_or(EPSILON_FRACTION * anchor_diagonal)), ..*self }
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        let bad = |m: &str| Err(CollisionError::InvalidParams(m.into()));
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad("epsilon must be finite and non-negative");
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if !(self.beta_max >= 0.0 && self.beta_max.is_finite()) {
            return bad("beta_max must be finite and non-negative");
        }
        if self.k_max < 1 {
            return bad("k_max must be at least 1");
        }
        if !(self.initial_step > 0.0) {
            return bad("initial_step must be positive");
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence_tol must be non-negative");
        }
        Ok(())
    }

    fn epsilon_or_err(&self) -> Result<f64, CollisionError> {
        self.epsilon
            .ok_or_else(|| CollisionError::InvalidParams("epsilon is unset; resolve it against the anchor first".into()))
    }
}

/// Local pose increment: `s ← s·exp(log_scale)`, `R ← exp([ω]ₓ)·R`,
/// `τ ← τ + δτ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseDelta {
    pub log_scale: f64,
    pub rotation_increment: Vector,
    pub translation_delta: Vector,
}

impl PoseDelta {
    pub fn from_array(a: [f64; 7]) -> Self {
        Self {
            log_scale: a[0],
            rotation_increment: Vector::new(a[1], a[2], a[3]),
            translation_delta: Vector::new(a[4], a[5], a[6]),
        }
    }

    pub fn to_array(&self) -> [f64; 7] {
        let (w, t) = (self.rotation_increment, self.translation_delta);
        [self.log_scale, w.x, w.y, w.z, t.x, t.y, t.z]
    }

    pub fn apply(&self, t: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform::new(
            t.scale * self.log_scale.exp(),
            UnitQuaternion::from_scaled_axis(self.rotation_increment) * t.rotation,
            t.translation + self.translation_delta,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

/// Linear annealing weight `β_max · k / k_max`.
pub fn beta_schedule(k: usize, k_max: usize, beta_max: f64) -> Result<f64, CollisionError> {
    if k_max == 0 || k > k_max {
        return Err(CollisionError::StageOutOfRange { k, k_max });
    }
    Ok(beta_max * k as f64 / k_max as f64)
}

/// Pull a world-space gradient `g` at `θ(p)` back to pose coordinates.
#[inline]
fn pullback(acc: &mut [f64; 7], a: &Vector, g: &Vector) {
    let w = a.cross(g);
    acc[0] += g.dot(a);
    acc[1] += w.x;
    acc[2] += w.y;
    acc[3] += w.z;
    acc[4] += g.x;
    acc[5] += g.y;
    acc[6] += g.z;
}

fn add7(a: &mut [f64; 7], b: &[f64; 7]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// Per-point collision contribution: value, world gradient and penetration.
#[inline]
fn collision_point(phi: f64, grad: &Vector, epsilon: f64, lambda: f64) -> (f64, Vector) {
    let mut v = 0.0;
    let mut g = Vector::zeros();
    if phi < 0.0 {
        v += phi * phi;
        g += 2.0 * phi * grad;
    }
    if phi < epsilon {
        v += lambda * (epsilon - phi);
        g -= lambda * grad;
    }
    (v, g)
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CollisionTerms {
    pub value: f64,
    pub gradient: [f64; 7],
    pub max_penetration: f64,
    /// Gauss-Newton diagonal of the squared-penetration part.
    pub curvature: [f64; 7],
}

pub(crate) fn collision_terms(
    field: &dyn DistanceField,
    points: &[Point],
    t: &SimilarityTransform,
    epsilon: f64,
    lambda: f64,
) -> CollisionTerms {
    let partial: Vec<CollisionTerms> = points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = CollisionTerms::default();
            for p in chunk {
                let a = t.apply_vector(&p.coords);
                let x = Point::from(a + t.translation);
                let (phi, grad) = field.query(&x);
                let (v, g) = collision_point(phi, &grad, epsilon, lambda);
                acc.value += v;
                pullback(&mut acc.gradient, &a, &g);
                if phi < 0.0 {
                    acc.max_penetration = acc.max_penetration.max(-phi);
                    let mut row = [0.0; 7];
                    pullback(&mut row, &a, &grad);
                    for (c, r) in acc.curvature.iter_mut().zip(row) {
                        *c += 2.0 * r * r;
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = CollisionTerms::default();
    for c in partial {
        out.value += c.value;
        add7(&mut out.gradient, &c.gradient);
        add7(&mut out.curvature, &c.curvature);
        out.max_penetration = out.max_penetration.max(c.max_penetration);
    }
    out
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct AlignTerms {
    pub value: f64,
    pub gradient: [f64; 7],
    pub curvature: [f64; 7],
}

pub(crate) fn alignment_terms(points: &[Point], targets: &[Point], t: &SimilarityTransform) -> AlignTerms {
    let partial: Vec<AlignTerms> = points
        .par_chunks(CHUNK)
        .zip(targets.par_chunks(CHUNK))
        .map(|(ps, qs)| {
            let mut acc = AlignTerms::default();
            for (p, q) in ps.iter().zip(qs) {
                let a = t.apply_vector(&p.coords);
                let r = a + t.translation - q.coords;
                acc.value += r.norm_squared();
                pullback(&mut acc.gradient, &a, &(2.0 * r));
                let sq = a.component_mul(&a);
                let c = [sq.sum(), sq.y + sq.z, sq.x + sq.z, sq.x + sq.y, 1.0, 1.0, 1.0];
                for (k, v) in acc.curvature.iter_mut().zip(c) {
                    *k += 2.0 * v;
                }
            }
            acc
        })
        .collect();
    let mut out = AlignTerms::default();
    for c in partial {
        out.value += c.value;
        add7(&mut out.gradient, &c.gradient);
        add7(&mut out.curvature, &c.curvature);
    }
    out
}

/// `Σ_p [−Φ(θ(p))]₊² + λ·[ε − Φ(θ(p))]₊` and its gradient in pose
/// coordinates at `t`. Hinges use a zero subgradient at their kinks.
pub fn collision_loss(
    field: &dyn DistanceField,
    points: &PointCloud,
    t: &SimilarityTransform,
    epsilon: f64,
    lambda: f64,
) -> Result<(f64, PoseDelta), CollisionError> {
    if points.is_empty() {
        return Err(CollisionError::EmptyCloud);
    }
    let c = collision_terms(field, &points.points, t, epsilon, lambda);
    Ok((c.value, PoseDelta::from_array(c.gradient)))
}

/// `Σ‖θ(p) − p′‖² + β·L_col(θ)` with every `p` paired to a fixed `p′`.
pub fn composition_objective(
    points: &[Point],
    fixed_targets: &[Point],
    field: &dyn DistanceField,
    t: &SimilarityTransform,
    params: &CollisionParams,
    beta: f64,
) -> Result<(f64, PoseDelta), CollisionError> {
    if points.len() != fixed_targets.len() {
        return Err(CollisionError::LengthMismatch(points.len(), fixed_targets.len()));
    }
    if points.is_empty() {
        return Err(CollisionError::EmptyCloud);
    }
    let eps = params.epsilon_or_err()?;
    let a = alignment_terms(points, fixed_targets, t);
    let c = collision_terms(field, points, t, eps, params.lambda);
    let mut g = a.gradient;
    for (x, y) in g.iter_mut().zip(c.gradient) {
        *x += beta * y;
    }
    Ok((a.value + beta * c.value, PoseDelta::from_array(g)))
}
