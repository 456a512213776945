use super::{Aabb, GeometryError, Point, SimilarityTransform, Vector};

/// Three corner positions.
pub type Triangle = [Point; 3];

/// Indexed triangle surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    face_areas: Vec<f64>,
}

impl TriangleMesh {
    /// Builds a mesh after checking face indices. Zero-area meshes are
    /// representable; operations that need a surface reject them.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= vertices.len() {
                    return Err(GeometryError::IndexOutOfRange { face: fi, index: i, count: vertices.len() });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(GeometryError::RepeatedIndex(fi));
            }
        }
        let face_areas = faces
            .iter()
            .map(|f| triangle_area(&[vertices[f[0]], vertices[f[1]], vertices[f[2]]]))
            .collect();
        Ok(Self { vertices, faces, face_areas })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> Triangle {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangles(&self) -> impl Iterator<Item = Triangle> + '_ {
        (0..self.faces.len()).map(|f| self.triangle(f))
    }

    pub fn total_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Unit normal of a face (zero for slivers).
    pub fn face_normal(&self, face: usize) -> Vector {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vector::zeros)
    }

    /// Errors unless the surface has positive area.
    pub fn ensure_surface(&self) -> Result<(), GeometryError> {
        let area = self.total_area();
        if self.faces.is_empty() || !(area > 0.0) {
            return Err(GeometryError::DegenerateMesh(format!(
                "{} faces with total area {area}",
                self.faces.len()
            )));
        }
        Ok(())
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter())
    }

    /// Copy with every vertex mapped through `t`.
    pub fn transformed(&self, t: &SimilarityTransform) -> Self {
        let vertices: Vec<Point> = self.vertices.iter().map(|p| t.apply(p)).collect();
        let s2 = t.scale * t.scale;
        Self {
            vertices,
            faces: self.faces.clone(),
            face_areas: self.face_areas.iter().map(|a| a * s2).collect(),
        }
    }

    /// Keeps the listed faces and drops vertices no longer referenced.
    pub fn subset(&self, keep: &[usize]) -> Self {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut faces = Vec::with_capacity(keep.len());
        let mut face_areas = Vec::with_capacity(keep.len());
        for &f in keep {
            let mut nf = [0usize; 3];
            for (k, &v) in self.faces[f].iter().enumerate() {
                if remap[v] == usize::MAX {
                    remap[v] = vertices.len();
                    vertices.push(self.vertices[v]);
                }
                nf[k] = remap[v];
            }
            faces.push(nf);
            face_areas.push(self.face_areas[f]);
        }
        Self { vertices, faces, face_areas }
    }

    /// Disjoint union of several meshes.
    pub fn merge<'a>(parts: impl IntoIterator<Item = &'a TriangleMesh>) -> Self {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut face_areas = Vec::new();
        for m in parts {
            let off = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
            face_areas.extend_from_slice(&m.face_areas);
        }
        Self { vertices, faces, face_areas }
    }
}

pub(crate) fn triangle_area(t: &Triangle) -> f64 {
    0.5 * (t[1] - t[0]).cross(&(t[2] - t[0])).norm()
}

/// Point set, optionally remembering the face each point was drawn from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub source_faces: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points, source_faces: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &SimilarityTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            source_faces: self.source_faces.clone(),
        }
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len().max(1) as f64;
        let sum = self.points.iter().fold(Vector::zeros(), |acc, p| acc + p.coords);
        Point::from(sum / n)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.points.iter())
    }
}
