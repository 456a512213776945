use serde::{Deserialize, Serialize};

use super::{find_correspondences_indexed, umeyama_solve, Correspondences, RegistrationError};
use crate::geometry::kdtree::KdTree;
use crate::geometry::{Point, PointCloud, SimilarityTransform};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once the relative change of the objective drops below this.
    pub convergence_tol: f64,
    /// Fraction of worst pairs discarded each iteration, in `[0, 1)`.
    pub trim_fraction: f64,
    pub correspondence_max_dist: Option<f64>,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self { max_iterations: 300, convergence_tol: 1e-8, trim_fraction: 0.1, correspondence_max_dist: None }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        if self.max_iterations < 1 {
            return Err(RegistrationError::InvalidParams("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(RegistrationError::InvalidParams("convergence_tol must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(RegistrationError::InvalidParams("trim_fraction must lie in [0, 1)".into()));
        }
        if let Some(d) = self.correspondence_max_dist {
            if !(d > 0.0) {
                return Err(RegistrationError::InvalidParams("correspondence_max_dist must be positive".into()));
            }
        }
        Ok(())
    }
}

/// One correspondence/solve cycle: mean squared residual over the retained
/// pairs before and after the closed-form update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpIteration {
    pub pairs: usize,
    pub objective_before: f64,
    pub objective_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub transform: SimilarityTransform,
    pub final_rmse: f64,
    pub iterations_run: usize,
    pub converged: bool,
    pub history: Vec<IcpIteration>,
}

/// Mean of `‖t(p) − q‖²` over the pairs.
pub fn alignment_objective(t: &SimilarityTransform, source: &[Point], target: &[Point], corr: &Correspondences) -> f64 {
    let sum: f64 = corr.pairs.iter().map(|&(i, j)| (t.apply(&source[i]) - target[j]).norm_squared()).sum();
    sum / corr.len().max(1) as f64
}

/// Alternates nearest-neighbour correspondences with a closed-form
/// similarity solve, starting from `init`. Returns the lowest-objective
/// transform seen.
pub fn scale_aware_icp(
    source: &PointCloud,
    target: &PointCloud,
    init: &SimilarityTransform,
    params: &IcpParams,
) -> Result<IcpResult, RegistrationError> {
    params.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(RegistrationError::EmptyCloud);
    }
    let tree = KdTree::new(&target.points);
    // Objectives this small are noise; treat them as converged.
    let floor = (1e-12 * target.aabb().diagonal()).powi(2);

    let mut current = *init;
    let mut best: Option<(SimilarityTransform, f64)> = None;
    let mut history = Vec::new();
    let mut converged = false;
    let mut moved = Vec::with_capacity(source.len());

    for _ in 0..params.max_iterations {
        moved.clear();
        moved.extend(source.points.iter().map(|p| current.apply(p)));
        let corr = find_correspondences_indexed(&moved, &tree, params)?;
        let before = corr.distances_squared.iter().sum::<f64>() / corr.len() as f64;

        let src: Vec<Point> = corr.pairs.iter().map(|&(i, _)| source.points[i]).collect();
        let dst: Vec<Point> = corr.pairs.iter().map(|&(_, j)| target.points[j]).collect();
        let next = umeyama_solve(&src, &dst, None, true)?;
        let after = alignment_objective(&next, &source.points, &target.points, &corr);
        history.push(IcpIteration { pairs: corr.len(), objective_before: before, objective_after: after });

        if best.map_or(true, |(_, b)| after < b) {
            best = Some((next, after));
        }
        current = next;
        if (before - after).abs() <= params.convergence_tol * before || after <= floor {
            converged = true;
            break;
        }
    }

    let (transform, obj) = best.expect("at least one iteration");
    Ok(IcpResult {
        transform,
        final_rmse: obj.max(0.0).sqrt(),
        iterations_run: history.len(),
        converged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{primitives, sample_surface, Vector};
    use nalgebra::UnitQuaternion;

    fn asymmetric_shape() -> crate::geometry::TriangleMesh {
        let b = primitives::subdivided_box(Vector::new(0.6, 0.35, 0.2), 4);
        let s = primitives::icosphere(0.18, 2).transformed(&SimilarityTransform::new(
            1.0,
            UnitQuaternion::identity(),
            Vector::new(0.45, 0.25, 0.45),
        ));
        crate::geometry::TriangleMesh::merge([&b, &s])
    }

    #[test]
    fn recovers_clean_similarity() {
        let mesh = asymmetric_shape();
        let src = sample_surface(&mesh, 3000, 1).unwrap();
        let axis = nalgebra::Unit::new_normalize(Vector::new(0.3, -0.5, 0.8));
        let truth = SimilarityTransform::new(1.3, UnitQuaternion::from_axis_angle(&axis, 25f64.to_radians()), Vector::new(0.1, 0.1, 0.1));
        let tgt = src.transformed(&truth);
        // Start at the true scale about the right centroid, rotation unknown.
        let init = SimilarityTransform::new(1.3, UnitQuaternion::identity(), tgt.centroid().coords - 1.3 * src.centroid().coords);
        let params = IcpParams { trim_fraction: 0.0, max_iterations: 200, ..Default::default() };
        let r = scale_aware_icp(&src, &tgt, &init, &params).unwrap();
        assert!(r.final_rmse < 1e-6, "rmse {}", r.final_rmse);
        assert!(r.transform.rotation_angle_to(&truth) < 1e-6);
    }

    #[test]
    fn objective_non_increasing_within_iterations() {
        let mesh = asymmetric_shape();
        let src = sample_surface(&mesh, 1500, 2).unwrap();
        let tgt = sample_surface(&mesh, 1500, 3).unwrap().transformed(&SimilarityTransform::new(
            0.7,
            UnitQuaternion::from_euler_angles(0.2, 0.1, -0.3),
            Vector::new(0.3, 0.0, -0.2),
        ));
        let r = scale_aware_icp(&src, &tgt, &SimilarityTransform::new(0.7, UnitQuaternion::identity(), Vector::new(0.3, 0.0, -0.2)), &IcpParams::default()).unwrap();
        for it in &r.history {
            assert!(it.objective_after <= it.objective_before * (1.0 + 1e-12), "{it:?}");
        }
    }

    #[test]
    fn single_iteration_contract() {
        let mesh = asymmetric_shape();
        let src = sample_surface(&mesh, 500, 4).unwrap();
        let tgt = src.transformed(&SimilarityTransform::new(1.0, UnitQuaternion::identity(), Vector::new(0.05, 0.0, 0.0)));
        let p = IcpParams { max_iterations: 1, ..Default::default() };
        let r = scale_aware_icp(&src, &tgt, &SimilarityTransform::identity(), &p).unwrap();
        assert_eq!(r.iterations_run, 1);
        assert_eq!(r.history.len(), 1);
    }

    #[test]
    fn rejects_bad_params() {
        let c = PointCloud::new(vec![Point::origin(); 3]);
        let p = IcpParams { trim_fraction: 1.0, ..Default::default() };
        assert!(matches!(scale_aware_icp(&c, &c, &SimilarityTransform::identity(), &p), Err(RegistrationError::InvalidParams(_))));
    }
}
