use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, PointCloud, Vector};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    /// The empty box (`min > max`); absorbs into any union.
    pub fn empty() -> Self {
        Self {
            min: Point::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn new(min: Point, max: Point) -> Self {
        Self { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Point) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb { min: self.min.inf(&other.min), max: self.max.sup(&other.max) }
    }

    pub fn extent(&self) -> Vector {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn longest_axis(&self) -> usize {
        self.extent().imax()
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vector::repeat(margin);
        Aabb { min: self.min - m, max: self.max + m }
    }

    /// Closed-set overlap test.
    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn clamp(&self, p: &Point) -> Point {
        p.sup(&self.min).inf(&self.max)
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Point) -> f64 {
        (self.clamp(p) - p).norm_squared()
    }
}

/// Oriented box from principal component analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obb {
    pub center: Point,
    /// Rows are orthonormal axes, ordered like `half_extents`.
    pub axes: [Vector; 3],
    /// Sorted descending.
    pub half_extents: [f64; 3],
}

/// PCA bounding box: axes are covariance eigenvectors, extents the half
/// ranges of the projections, sorted descending. Axes 0 and 1 have their
/// largest-magnitude component made positive (first such component on
/// ties); axis 2 is their cross product, so the frame is right-handed.
pub fn compute_obb(points: &PointCloud) -> Obb {
    let pts = &points.points;
    if pts.is_empty() {
        return Obb { center: Point::origin(), axes: identity_axes(), half_extents: [0.0; 3] };
    }
    let centroid = points.centroid();
    let mut cov = Matrix3::zeros();
    for p in pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut axes = [Vector::zeros(); 3];
    for (k, &i) in order.iter().enumerate() {
        axes[k] = eig.eigenvectors.column(i).normalize();
    }
    for axis in axes.iter_mut().take(2) {
        fix_sign(axis);
    }
    axes[2] = axes[0].cross(&axes[1]).normalize();

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in pts {
        let d = p - centroid;
        for k in 0..3 {
            let x = d.dot(&axes[k]);
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    let mut half = [0.0; 3];
    let mut center = centroid;
    for k in 0..3 {
        half[k] = 0.5 * (hi[k] - lo[k]);
        center += axes[k] * (0.5 * (hi[k] + lo[k]));
    }

    // Eigenvalue order and range order can disagree for skewed clouds.
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| half[b].total_cmp(&half[a]));
    if idx != [0, 1, 2] {
        let (a, h) = (axes, half);
        for k in 0..3 {
            axes[k] = a[idx[k]];
            half[k] = h[idx[k]];
        }
        for axis in axes.iter_mut().take(2) {
            fix_sign(axis);
        }
        axes[2] = axes[0].cross(&axes[1]).normalize();
    }

    Obb { center, axes, half_extents: half }
}

fn identity_axes() -> [Vector; 3] {
    [Vector::x(), Vector::y(), Vector::z()]
}

fn fix_sign(axis: &mut Vector) {
    let mut best = 0;
    for i in 1..3 {
        if axis[i].abs() > axis[best].abs() {
            best = i;
        }
    }
    if axis[best] < 0.0 {
        *axis = -*axis;
    }
}

const EXTENT_EPS: f64 = 1e-12;

/// Geometric mean of the per-axis extent ratios `target / source`, taken over
/// axes where both extents are non-negligible.
pub fn estimate_scale_from_obb(source: &Obb, target: &Obb) -> Result<f64, GeometryError> {
    let mut log_sum = 0.0;
    let mut n = 0;
    for i in 0..3 {
        let (s, t) = (source.half_extents[i], target.half_extents[i]);
        if s > EXTENT_EPS && t > EXTENT_EPS {
            log_sum += (t / s).ln();
            n += 1;
        }
    }
    if n == 0 {
        return Err(GeometryError::DegenerateSource);
    }
    Ok((log_sum / n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::UnitQuaternion;
    use rand::Rng;

    fn obb_with(h: [f64; 3]) -> Obb {
        Obb { center: Point::origin(), axes: identity_axes(), half_extents: h }
    }

    /// Dense samples of the solid box `[-a,a]×[-b,b]×[-c,c]` on the surface.
    fn box_surface(h: [f64; 3], n: usize, seed: u64) -> PointCloud {
        let mut rng = crate::rng::stream(seed, 0);
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let mut p = [0.0; 3];
            for k in 0..3 {
                p[k] = rng.gen_range(-h[k]..=h[k]);
            }
            let axis = rng.gen_range(0..3);
            p[axis] = if rng.gen::<bool>() { h[axis] } else { -h[axis] };
            pts.push(Point::from(p));
        }
        PointCloud::new(pts)
    }

    #[test]
    fn box_extents_recovered() {
        let cloud = box_surface([1.0, 0.5, 0.25], 20_000, 3);
        let obb = compute_obb(&cloud);
        let expect = [1.0, 0.5, 0.25];
        for k in 0..3 {
            assert!((obb.half_extents[k] - expect[k]).abs() / expect[k] < 0.02, "{:?}", obb.half_extents);
        }
    }

    #[test]
    fn single_point() {
        let p = Point::new(1.0, -2.0, 3.0);
        let obb = compute_obb(&PointCloud::new(vec![p]));
        assert_eq!(obb.half_extents, [0.0; 3]);
        assert!((obb.center - p).norm() < 1e-15);
    }

    #[test]
    fn axes_are_orthonormal_and_right_handed() {
        let obb = compute_obb(&box_surface([0.7, 0.4, 0.1], 5000, 9));
        let m = Matrix3::from_columns(&obb.axes);
        assert!((m.transpose() * m - Matrix3::identity()).amax() < 1e-9);
        assert!((m.determinant() - 1.0).abs() < 1e-9);
        assert!(obb.half_extents[0] >= obb.half_extents[1] && obb.half_extents[1] >= obb.half_extents[2]);
    }

    #[test]
    fn extents_are_rotation_invariant() {
        let cloud = box_surface([0.9, 0.6, 0.2], 4000, 5);
        let rot = UnitQuaternion::from_euler_angles(0.4, 1.1, -0.7);
        let rotated = PointCloud::new(cloud.points.iter().map(|p| rot * p).collect());
        let a = compute_obb(&cloud);
        let b = compute_obb(&rotated);
        for k in 0..3 {
            assert!((a.half_extents[k] - b.half_extents[k]).abs() < 1e-6);
            // Same axis up to sign.
            assert!(((rot * a.axes[k]).dot(&b.axes[k]).abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn scale_rules() {
        assert!((estimate_scale_from_obb(&obb_with([1.0; 3]), &obb_with([2.0; 3])).unwrap() - 2.0).abs() < 1e-15);
        let s = estimate_scale_from_obb(&obb_with([2.0, 1.0, 0.5]), &obb_with([4.0, 2.0, 1.0])).unwrap();
        assert!((s - 2.0).abs() < 1e-15);
        let s = estimate_scale_from_obb(&obb_with([1.0, 1.0, 0.0]), &obb_with([3.0, 3.0, 0.0])).unwrap();
        assert!((s - 3.0).abs() < 1e-15);
        assert!(matches!(
            estimate_scale_from_obb(&obb_with([0.0; 3]), &obb_with([1.0; 3])),
            Err(GeometryError::DegenerateSource)
        ));
    }

    #[test]
    fn aabb_distance() {
        let b = Aabb::new(Point::origin(), Point::new(1.0, 1.0, 1.0));
        assert_eq!(b.distance_squared(&Point::new(0.5, 0.5, 0.5)), 0.0);
        assert!((b.distance_squared(&Point::new(3.0, 0.5, 0.5)) - 4.0).abs() < 1e-15);
        assert!(Aabb::empty().is_empty());
    }
}
