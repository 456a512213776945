use nalgebra::{Matrix3, SymmetricEigen, SVD};

use super::RegistrationError;
use crate::geometry::{Point, SimilarityTransform, Vector};

/// Relative singular-value floor below which a direction counts as absent.
const RANK_EPS: f64 = 1e-12;

/// Least-squares similarity (or rigid, when `with_scale` is false) mapping
/// `source[i]` onto `target[i]`, minimising `Σ wᵢ‖s·R·pᵢ + τ − qᵢ‖²`.
///
/// Reflections are excluded by flipping the weakest singular direction when
/// `det(U)·det(V) < 0`.
pub fn umeyama_solve(
    source: &[Point],
    target: &[Point],
    weights: Option<&[f64]>,
    with_scale: bool,
) -> Result<SimilarityTransform, RegistrationError> {
    if source.len() != target.len() {
        return Err(RegistrationError::LengthMismatch(source.len(), target.len()));
    }
    if source.len() < 3 {
        return Err(RegistrationError::InsufficientPoints { needed: 3, got: source.len() });
    }
    let total = match weights {
        Some(w) => {
            if w.len() != source.len() {
                return Err(RegistrationError::InvalidWeights("length differs from point count".into()));
            }
            if w.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
                return Err(RegistrationError::InvalidWeights("weights must be finite and non-negative".into()));
            }
            let t: f64 = w.iter().sum();
            if !(t > 0.0) {
                return Err(RegistrationError::InvalidWeights("weights sum to zero".into()));
            }
            t
        }
        None => source.len() as f64,
    };
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]) / total;

    let mut mu_s = Vector::zeros();
    let mut mu_t = Vector::zeros();
    for i in 0..source.len() {
        let w = weight(i);
        mu_s += source[i].coords * w;
        mu_t += target[i].coords * w;
    }

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_s = 0.0;
    for i in 0..source.len() {
        let w = weight(i);
        let ds = source[i].coords - mu_s;
        let dt = target[i].coords - mu_t;
        cross += dt * ds.transpose() * w;
        scatter += ds * ds.transpose() * w;
        var_s += ds.norm_squared() * w;
    }

    let mut spread = SymmetricEigen::new(scatter).eigenvalues;
    spread.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] <= RANK_EPS * spread[0] {
        return Err(RegistrationError::DegenerateConfiguration(
            "source points are coincident or collinear".into(),
        ));
    }

    let svd = SVD::new(cross, true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Err(RegistrationError::DegenerateConfiguration("SVD did not converge".into()));
    };
    // nalgebra does not order singular values; find the weakest one.
    let d = svd.singular_values;
    let dmax = d.max();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    if !(dmax > 0.0) || d[order[1]] <= RANK_EPS * dmax {
        return Err(RegistrationError::DegenerateConfiguration(
            "cross-covariance has rank below 2".into(),
        ));
    }

    let mut s_diag = Vector::repeat(1.0);
    if u.determinant() * v_t.determinant() < 0.0 {
        s_diag[order[2]] = -1.0;
    }
    let rotation = u * Matrix3::from_diagonal(&s_diag) * v_t;
    let scale = if with_scale { d.dot(&s_diag) / var_s } else { 1.0 };
    if !(scale > 0.0) {
        return Err(RegistrationError::DegenerateConfiguration(format!("non-positive scale {scale}")));
    }
    let translation = mu_t - scale * (rotation * mu_s);
    Ok(SimilarityTransform::from_matrix(scale, &rotation, translation))
}
