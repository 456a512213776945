use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Point, Vector};

/// Uniform scale, proper rotation and translation acting as `p ↦ s·R·p + τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: UnitQuaternion::identity(), translation: Vector::zeros() }
    }

    pub fn new(scale: f64, rotation: UnitQuaternion<f64>, translation: Vector) -> Self {
        debug_assert!(scale > 0.0, "scale must be positive");
        Self { scale, rotation, translation }
    }

    /// From a rotation matrix. The matrix is re-orthonormalised through the
    /// quaternion conversion.
    pub fn from_matrix(scale: f64, rotation: &Matrix3<f64>, translation: Vector) -> Self {
        let rot = Rotation3::from_matrix_unchecked(*rotation);
        Self::new(scale, UnitQuaternion::from_rotation_matrix(&rot), translation)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn apply(&self, p: &Point) -> Point {
        Point::from(self.scale * (self.rotation * p.coords) + self.translation)
    }

    /// Applies only scale and rotation (for directions and offsets).
    pub fn apply_vector(&self, v: &Vector) -> Vector {
        self.scale * (self.rotation * v)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &SimilarityTransform) -> Self {
        Self {
            scale: self.scale * inner.scale,
            rotation: self.rotation * inner.rotation,
            translation: self.scale * (self.rotation * inner.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rinv = self.rotation.inverse();
        let sinv = 1.0 / self.scale;
        Self { scale: sinv, rotation: rinv, translation: -(sinv * (rinv * self.translation)) }
    }

    /// Geodesic angle (radians) between the two rotations, accurate near zero.
    pub fn rotation_angle_to(&self, other: &SimilarityTransform) -> f64 {
        rotation_angle(&(self.rotation.inverse() * other.rotation))
    }

    pub fn is_finite(&self) -> bool {
        self.scale.is_finite()
            && self.translation.iter().all(|x| x.is_finite())
            && self.rotation.coords.iter().all(|x| x.is_finite())
    }
}

/// Rotation angle of a unit quaternion in `[0, π]`.
pub fn rotation_angle(q: &UnitQuaternion<f64>) -> f64 {
    let v = q.imag().norm();
    2.0 * v.atan2(q.w.abs())
}

#[derive(Serialize, Deserialize)]
struct TransformRepr {
    scale: f64,
    rotation_quat: [f64; 4],
    translation: [f64; 3],
}

impl Serialize for SimilarityTransform {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let q = self.rotation.quaternion();
        TransformRepr {
            scale: self.scale,
            rotation_quat: [q.w, q.i, q.j, q.k],
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SimilarityTransform {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let r = TransformRepr::deserialize(deserializer)?;
        if !(r.scale > 0.0) || !r.scale.is_finite() {
            return Err(serde::de::Error::custom("scale must be positive and finite"));
        }
        let [w, x, y, z] = r.rotation_quat;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(serde::de::Error::custom("rotation quaternion must be non-zero"));
        }
        // Stored quaternions are unit up to printing precision; keep them
        // bit-exact so files round-trip.
        let rotation = if (norm - 1.0).abs() < 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        Ok(Self { scale: r.scale, rotation, translation: Vector::from(r.translation) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn arb_transform() -> impl Strategy<Value = SimilarityTransform> {
        (
            0.1f64..10.0,
            prop::array::uniform3(-1.0f64..1.0),
            -3.0f64..3.0,
            prop::array::uniform3(-10.0f64..10.0),
        )
            .prop_filter_map("axis", |(s, axis, angle, t)| {
                let axis = nalgebra::Unit::try_new(Vector::from(axis), 1e-3)?;
                Some(SimilarityTransform::new(
                    s,
                    UnitQuaternion::from_axis_angle(&axis, angle),
                    Vector::from(t),
                ))
            })
    }

    #[test]
    fn hand_evaluations() {
        let p = Point::new(1.0, 2.0, 3.0);
        assert_eq!(SimilarityTransform::identity().apply(&p), p);

        let t = SimilarityTransform::new(2.0, UnitQuaternion::identity(), Vector::new(1.0, 0.0, 0.0));
        assert_eq!(t.apply(&Point::new(1.0, 1.0, 1.0)), Point::new(3.0, 2.0, 2.0));

        let rz = UnitQuaternion::from_axis_angle(&Vector::z_axis(), FRAC_PI_2);
        let t = SimilarityTransform::new(1.0, rz, Vector::zeros());
        let q = t.apply(&Point::new(1.0, 0.0, 0.0));
        assert!((q - Point::new(0.0, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn rotation_matrix_is_proper() {
        let t = SimilarityTransform::new(
            1.0,
            UnitQuaternion::from_euler_angles(0.3, -1.2, 2.0),
            Vector::zeros(),
        );
        let r = t.rotation_matrix();
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn small_angles_are_accurate() {
        let a = SimilarityTransform::identity();
        let b = SimilarityTransform::new(
            1.0,
            UnitQuaternion::from_axis_angle(&Vector::x_axis(), 1e-11),
            Vector::zeros(),
        );
        assert!((a.rotation_angle_to(&b) - 1e-11).abs() < 1e-20);
    }

    #[test]
    fn json_shape() {
        let v = serde_json::to_value(SimilarityTransform::identity()).unwrap();
        assert_eq!(v["scale"], 1.0);
        assert_eq!(v["rotation_quat"], serde_json::json!([1.0, 0.0, 0.0, 0.0]));
        assert_eq!(v["translation"], serde_json::json!([0.0, 0.0, 0.0]));
    }

    proptest! {
        #[test]
        fn compose_matches_sequential_application(
            a in arb_transform(), b in arb_transform(), p in prop::array::uniform3(-5.0f64..5.0)
        ) {
            let p = Point::from(p);
            let lhs = a.compose(&b).apply(&p);
            let rhs = a.apply(&b.apply(&p));
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + rhs.coords.norm()));
        }

        #[test]
        fn inverse_round_trips(a in arb_transform(), p in prop::array::uniform3(-5.0f64..5.0)) {
            let p = Point::from(p);
            let back = a.inverse().apply(&a.apply(&p));
            prop_assert!((back - p).norm() <= 1e-9 * (1.0 + p.coords.norm()));
        }

        #[test]
        fn json_round_trip_is_exact(a in arb_transform()) {
            let s = serde_json::to_string(&a).unwrap();
            let b: SimilarityTransform = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(a.scale, b.scale);
            prop_assert_eq!(a.translation, b.translation);
            prop_assert!((a.rotation.coords - b.rotation.coords).amax() <= 1e-12);
        }
    }
}
