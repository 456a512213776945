//! Bounding volume hierarchy over triangles.
//!
//! Median split on the longest centroid axis, at most [`LEAF_SIZE`]
//! triangles per leaf. Used for closest-point queries (SDF baking), ray
//! crossing counts (inside tests) and triangle pair pruning (surface
//! intersection ratio).

use super::{Aabb, Point, Triangle, TriangleMesh, Vector};

const LEAF_SIZE: usize = 4;

/// Barycentric slack within which a ray hit counts as grazing an edge.
pub const EDGE_EPS: f64 = 1e-9;

#[derive(Debug, Clone)]
struct Node {
    bbox: Aabb,
    /// Leaf: first entry in `order`. Internal: index of the left child
    /// (the right child follows it).
    first: usize,
    /// Zero for internal nodes.
    count: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh {
    triangles: Vec<Triangle>,
    /// Original face index for each triangle slot.
    faces: Vec<usize>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub distance_squared: f64,
    pub face: usize,
    pub point: Point,
}

/// A ray passed within [`EDGE_EPS`] of an edge or vertex, or ran inside a
/// triangle's plane; its crossing count is unreliable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grazing;

impl Bvh {
    pub fn from_mesh(mesh: &TriangleMesh) -> Self {
        Self::build(mesh.triangles().collect(), (0..mesh.num_faces()).collect())
    }

    /// Only faces with positive area.
    pub fn from_mesh_nondegenerate(mesh: &TriangleMesh) -> Self {
        let faces: Vec<usize> = (0..mesh.num_faces())
            .filter(|&f| mesh.face_areas()[f] > super::intersect::MIN_AREA)
            .collect();
        Self::build(faces.iter().map(|&f| mesh.triangle(f)).collect(), faces)
    }

    pub fn build(triangles: Vec<Triangle>, faces: Vec<usize>) -> Self {
        assert_eq!(triangles.len(), faces.len());
        let mut bvh = Self { order: (0..triangles.len()).collect(), triangles, faces, nodes: Vec::new() };
        if bvh.triangles.is_empty() {
            return bvh;
        }
        let boxes: Vec<Aabb> = bvh.triangles.iter().map(|t| Aabb::from_points(t.iter())).collect();
        let centroids: Vec<Point> = bvh
            .triangles
            .iter()
            .map(|t| Point::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        bvh.nodes.push(Node { bbox: Aabb::empty(), first: 0, count: 0 });
        let mut order = std::mem::take(&mut bvh.order);
        bvh.split(0, &mut order, 0, &boxes, &centroids);
        bvh.order = order;
        bvh
    }

    fn split(&mut self, node: usize, order: &mut [usize], offset: usize, boxes: &[Aabb], centroids: &[Point]) {
        let bbox = order.iter().fold(Aabb::empty(), |b, &i| b.union(&boxes[i]));
        self.nodes[node].bbox = bbox;
        if order.len() <= LEAF_SIZE {
            self.nodes[node].first = offset;
            self.nodes[node].count = order.len();
            return;
        }
        let cbox = Aabb::from_points(order.iter().map(|&i| &centroids[i]));
        let axis = cbox.longest_axis();
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        let left = self.nodes.len();
        self.nodes.push(Node { bbox: Aabb::empty(), first: 0, count: 0 });
        self.nodes.push(Node { bbox: Aabb::empty(), first: 0, count: 0 });
        self.nodes[node].first = left;
        self.nodes[node].count = 0;
        let (lo, hi) = order.split_at_mut(mid);
        self.split(left, lo, offset, boxes, centroids);
        self.split(left + 1, hi, offset + mid, boxes, centroids);
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        self.nodes.first().map_or(Aabb::empty(), |n| n.bbox)
    }

    pub fn triangle(&self, slot: usize) -> &Triangle {
        &self.triangles[slot]
    }

    /// Face index in the source mesh for a triangle slot.
    pub fn face(&self, slot: usize) -> usize {
        self.faces[slot]
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    /// Closest surface point, considering only candidates strictly closer
    /// than `bound` (squared). `f64::INFINITY` searches everything.
    pub fn closest(&self, p: &Point, bound: f64) -> Option<ClosestHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<ClosestHit> = None;
        let mut best_d = bound;
        let mut stack = vec![(0usize, self.nodes[0].bbox.distance_squared(p))];
        while let Some((n, d)) = stack.pop() {
            if d > best_d {
                continue;
            }
            let node = &self.nodes[n];
            if node.count > 0 {
                for &slot in &self.order[node.first..node.first + node.count] {
                    let (d2, q) = closest_point_on_triangle(p, &self.triangles[slot]);
                    let better = match best {
                        None => d2 <= best_d,
                        Some(b) => d2 < b.distance_squared || (d2 == b.distance_squared && self.faces[slot] < b.face),
                    };
                    if better {
                        best_d = d2;
                        best = Some(ClosestHit { distance_squared: d2, face: self.faces[slot], point: q });
                    }
                }
            } else {
                let (l, r) = (node.first, node.first + 1);
                let dl = self.nodes[l].bbox.distance_squared(p);
                let dr = self.nodes[r].bbox.distance_squared(p);
                // Nearer child popped first.
                if dl <= dr {
                    stack.push((r, dr));
                    stack.push((l, dl));
                } else {
                    stack.push((l, dl));
                    stack.push((r, dr));
                }
            }
        }
        best
    }

    /// Ray parameters `t > 0` of every crossing of `origin + t·dir`, sorted.
    pub fn ray_hits(&self, origin: &Point, dir: &Vector, hits: &mut Vec<f64>) -> Result<(), Grazing> {
        hits.clear();
        if self.nodes.is_empty() {
            return Ok(());
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !ray_hits_box(origin, dir, &inv, &node.bbox) {
                continue;
            }
            if node.count > 0 {
                for &slot in &self.order[node.first..node.first + node.count] {
                    match ray_triangle(origin, dir, &self.triangles[slot]) {
                        RayTri::Miss => {}
                        RayTri::Hit(t) => hits.push(t),
                        RayTri::Grazing => return Err(Grazing),
                    }
                }
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
        hits.sort_by(f64::total_cmp);
        Ok(())
    }

    /// Number of crossings along the ray.
    pub fn crossings(&self, origin: &Point, dir: &Vector) -> Result<usize, Grazing> {
        let mut count = 0;
        if self.nodes.is_empty() {
            return Ok(0);
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !ray_hits_box(origin, dir, &inv, &node.bbox) {
                continue;
            }
            if node.count > 0 {
                for &slot in &self.order[node.first..node.first + node.count] {
                    match ray_triangle(origin, dir, &self.triangles[slot]) {
                        RayTri::Miss => {}
                        RayTri::Hit(_) => count += 1,
                        RayTri::Grazing => return Err(Grazing),
                    }
                }
            } else {
                stack.push(node.first);
                stack.push(node.first + 1);
            }
        }
        Ok(count)
    }

    /// Calls `f(slot_a, slot_b)` for every pair of triangles whose boxes
    /// overlap (closed boxes, so touching pairs are included).
    pub fn overlapping_pairs(&self, other: &Bvh, mut f: impl FnMut(usize, usize)) {
        if self.nodes.is_empty() || other.nodes.is_empty() {
            return;
        }
        let mut stack = vec![(0usize, 0usize)];
        while let Some((a, b)) = stack.pop() {
            let (na, nb) = (&self.nodes[a], &other.nodes[b]);
            if !na.bbox.intersects(&nb.bbox) {
                continue;
            }
            match (na.count > 0, nb.count > 0) {
                (true, true) => {
                    for &sa in &self.order[na.first..na.first + na.count] {
                        let ba = Aabb::from_points(self.triangles[sa].iter());
                        for &sb in &other.order[nb.first..nb.first + nb.count] {
                            if ba.intersects(&Aabb::from_points(other.triangles[sb].iter())) {
                                f(sa, sb);
                            }
                        }
                    }
                }
                (true, false) => {
                    stack.push((a, nb.first));
                    stack.push((a, nb.first + 1));
                }
                (false, true) => {
                    stack.push((na.first, b));
                    stack.push((na.first + 1, b));
                }
                (false, false) => {
                    // Descend the larger box.
                    if na.bbox.diagonal() >= nb.bbox.diagonal() {
                        stack.push((na.first, b));
                        stack.push((na.first + 1, b));
                    } else {
                        stack.push((a, nb.first));
                        stack.push((a, nb.first + 1));
                    }
                }
            }
        }
    }
}

fn ray_hits_box(o: &Point, dir: &Vector, inv: &Vector, b: &Aabb) -> bool {
    let mut t0 = 0.0f64;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        if dir[i] == 0.0 {
            if o[i] < b.min[i] || o[i] > b.max[i] {
                return false;
            }
            continue;
        }
        let (mut a, mut c) = ((b.min[i] - o[i]) * inv[i], (b.max[i] - o[i]) * inv[i]);
        if a > c {
            std::mem::swap(&mut a, &mut c);
        }
        t0 = t0.max(a);
        t1 = t1.min(c);
        if t0 > t1 {
            return false;
        }
    }
    true
}

enum RayTri {
    Miss,
    Hit(f64),
    Grazing,
}

/// Möller–Trumbore with explicit grazing detection.
fn ray_triangle(o: &Point, dir: &Vector, tri: &Triangle) -> RayTri {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let n = e1.cross(&e2);
    let scale = n.norm() * dir.norm();
    if det.abs() <= 1e-12 * scale {
        // Parallel: only a problem when the ray runs inside the plane.
        let off = (o - tri[0]).dot(&n);
        if off.abs() <= 1e-12 * n.norm() * (e1.norm() + e2.norm()) {
            return RayTri::Grazing;
        }
        return RayTri::Miss;
    }
    let inv_det = 1.0 / det;
    let tvec = o - tri[0];
    let u = tvec.dot(&pvec) * inv_det;
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv_det;
    let w = 1.0 - u - v;
    let t = e2.dot(&qvec) * inv_det;
    if t <= 0.0 {
        return RayTri::Miss;
    }
    if u < -EDGE_EPS || v < -EDGE_EPS || w < -EDGE_EPS {
        return RayTri::Miss;
    }
    if u < EDGE_EPS || v < EDGE_EPS || w < EDGE_EPS {
        return RayTri::Grazing;
    }
    RayTri::Hit(t)
}

/// Squared distance from `p` to the triangle and the closest point
/// (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point, tri: &Triangle) -> (f64, Point) {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    let q = 'region: {
        if d1 <= 0.0 && d2 <= 0.0 {
            break 'region a;
        }
        let bp = p - b;
        let d3 = ab.dot(&bp);
        let d4 = ac.dot(&bp);
        if d3 >= 0.0 && d4 <= d3 {
            break 'region b;
        }
        let vc = d1 * d4 - d3 * d2;
        if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
            let v = d1 / (d1 - d3);
            break 'region a + ab * v;
        }
        let cp = p - c;
        let d5 = ab.dot(&cp);
        let d6 = ac.dot(&cp);
        if d6 >= 0.0 && d5 <= d6 {
            break 'region c;
        }
        let vb = d5 * d2 - d1 * d6;
        if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
            let w = d2 / (d2 - d6);
            break 'region a + ac * w;
        }
        let va = d3 * d6 - d5 * d4;
        if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
            let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
            break 'region b + (c - b) * w;
        }
        let denom = 1.0 / (va + vb + vc);
        let v = vb * denom;
        let w = vc * denom;
        a + ab * v + ac * w
    };
    ((p - q).norm_squared(), q)
}
