//! Closed, outward-oriented primitive meshes.

use std::collections::HashMap;

use super::{Point, TriangleMesh, Vector};

/// Axis-aligned unit cube centred at the origin: 8 vertices, 12 triangles.
pub fn unit_cube() -> TriangleMesh {
    cuboid(Vector::new(0.5, 0.5, 0.5))
}

/// Axis-aligned box with the given half extents, 12 triangles.
pub fn cuboid(half: Vector) -> TriangleMesh {
    let v: Vec<Point> = (0..8)
        .map(|i| {
            Point::new(
                if i & 1 == 0 { -half.x } else { half.x },
                if i & 2 == 0 { -half.y } else { half.y },
                if i & 4 == 0 { -half.z } else { half.z },
            )
        })
        .collect();
    let faces = vec![
        [0, 2, 1], [1, 2, 3], // -z
        [4, 5, 6], [5, 7, 6], // +z
        [0, 1, 4], [1, 5, 4], // -y
        [2, 6, 3], [3, 6, 7], // +y
        [0, 4, 2], [2, 4, 6], // -x
        [1, 3, 5], [3, 7, 5], // +x
    ];
    TriangleMesh::new(v, faces).expect("valid cuboid")
}

/// Box whose sides are split into `n × n` quads (two triangles each), with
/// shared vertices along the seams.
pub fn subdivided_box(half: Vector, n: usize) -> TriangleMesh {
    let n = n.max(1);
    let mut builder = Welder::default();
    let mut faces = Vec::new();
    // (normal axis, sign): the two in-plane axes are ordered so the quad
    // winding points outward.
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let (u, v) = if sign > 0.0 { ((axis + 1) % 3, (axis + 2) % 3) } else { ((axis + 2) % 3, (axis + 1) % 3) };
            let corner = |i: usize, j: usize| {
                let mut p = Point::origin();
                p[axis] = sign * half[axis];
                p[u] = -half[u] + 2.0 * half[u] * i as f64 / n as f64;
                p[v] = -half[v] + 2.0 * half[v] * j as f64 / n as f64;
                p
            };
            for i in 0..n {
                for j in 0..n {
                    let a = builder.index(corner(i, j));
                    let b = builder.index(corner(i + 1, j));
                    let c = builder.index(corner(i + 1, j + 1));
                    let d = builder.index(corner(i, j + 1));
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
            }
        }
    }
    TriangleMesh::new(builder.vertices, faces).expect("valid box")
}

/// Geodesic sphere from a subdivided icosahedron; level 0 has 20 faces and
/// every level multiplies the count by four.
pub fn icosphere(radius: f64, level: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector> = [
        [-1.0, t, 0.0], [1.0, t, 0.0], [-1.0, -t, 0.0], [1.0, -t, 0.0],
        [0.0, -1.0, t], [0.0, 1.0, t], [0.0, -1.0, -t], [0.0, 1.0, -t],
        [t, 0.0, -1.0], [t, 0.0, 1.0], [-t, 0.0, -1.0], [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Vector::from(*v).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vector>| {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push((verts[a] + verts[b]).normalize());
                verts.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.into_iter().map(|v| Point::from(v * radius)).collect();
    TriangleMesh::new(vertices, faces).expect("valid icosphere")
}

/// Capped cylinder along +z centred at the origin. The side is split into
/// `rings` bands; caps are fans around a centre vertex.
pub fn cylinder(radius: f64, half_height: f64, segments: usize, rings: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let rings = rings.max(1);
    let mut vertices = Vec::new();
    for r in 0..=rings {
        let z = -half_height + 2.0 * half_height * r as f64 / rings as f64;
        for s in 0..segments {
            let a = std::f64::consts::TAU * s as f64 / segments as f64;
            vertices.push(Point::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let ring = |r: usize, s: usize| r * segments + s % segments;
    let mut faces = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            let (a, b, c, d) = (ring(r, s), ring(r, s + 1), ring(r + 1, s + 1), ring(r + 1, s));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    let bottom = vertices.len();
    vertices.push(Point::new(0.0, 0.0, -half_height));
    let top = vertices.len();
    vertices.push(Point::new(0.0, 0.0, half_height));
    for s in 0..segments {
        faces.push([bottom, ring(0, s + 1), ring(0, s)]);
        faces.push([top, ring(rings, s), ring(rings, s + 1)]);
    }
    TriangleMesh::new(vertices, faces).expect("valid cylinder")
}

/// Deduplicates exactly equal positions.
#[derive(Default)]
struct Welder {
    vertices: Vec<Point>,
    lookup: HashMap<[u64; 3], usize>,
}

impl Welder {
    fn index(&mut self, p: Point) -> usize {
        // Normalise -0.0 so both zeros hash alike.
        let key = [p.x + 0.0, p.y + 0.0, p.z + 0.0].map(f64::to_bits);
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            self.vertices.len() - 1
        })
    }
}

/// Signed volume via the divergence theorem; positive for outward winding.
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    mesh.triangles().map(|[a, b, c]| a.coords.dot(&b.coords.cross(&c.coords)) / 6.0).sum()
}
