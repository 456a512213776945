//! Dense signed distance grids: baking from meshes, trilinear queries with
//! analytic gradients, and a small binary file format.

mod bake;
mod io;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{Aabb, GeometryError, Point, Vector};

pub use bake::{bake_sdf, bake_sdf_with_stats, BakeStats, DEFAULT_PADDING, DEFAULT_RESOLUTION};
pub use io::{load_sdf, read_sdf, save_sdf, write_sdf};

#[derive(Debug, Error)]
pub enum SdfError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("not an SDF1 file")]
    BadMagic,
    #[error("grid file is truncated")]
    Truncated,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything the placement optimizer can push points out of.
pub trait DistanceField: Sync {
    /// Signed distance and its gradient.
    fn query(&self, p: &Point) -> (f64, Vector);

    fn value(&self, p: &Point) -> f64 {
        self.query(p).0
    }

    /// Strictly negative distance.
    fn point_inside(&self, p: &Point) -> bool {
        self.value(p) < 0.0
    }

    /// Finest lattice spacing, used to size default margins.
    fn spacing(&self) -> f64;
}

/// Signed distance samples on a regular lattice, negative inside.
/// Values are stored at single precision, x fastest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdfGrid {
    origin: Point,
    spacing: f64,
    dims: [usize; 3],
    values: Vec<f32>,
}

impl SdfGrid {
    pub fn new(origin: Point, spacing: f64, dims: [usize; 3], values: Vec<f32>) -> Result<Self, SdfError> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(SdfError::InvalidGrid(format!("spacing {spacing}")));
        }
        if dims.iter().any(|&d| d < 2) {
            return Err(SdfError::InvalidGrid(format!("dims {dims:?} must all be at least 2")));
        }
        let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
        if n != Some(values.len()) {
            return Err(SdfError::InvalidGrid(format!("{} values for dims {dims:?}", values.len())));
        }
        if !origin.iter().all(|x| x.is_finite()) || !values.iter().all(|v| v.is_finite()) {
            return Err(SdfError::InvalidGrid("non-finite entries".into()));
        }
        Ok(Self { origin, spacing, dims, values })
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn lattice_point(&self, i: usize, j: usize, k: usize) -> Point {
        self.origin + Vector::new(i as f64, j as f64, k as f64) * self.spacing
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)] as f64
    }

    pub fn bounds(&self) -> Aabb {
        let ext = Vector::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ) * self.spacing;
        Aabb::new(self.origin, self.origin + ext)
    }

    /// Trilinear value and gradient at a point inside the lattice box.
    fn trilinear(&self, p: &Point) -> (f64, Vector) {
        let g = (p - self.origin) / self.spacing;
        let mut cell = [0usize; 3];
        let mut f = [0.0; 3];
        for a in 0..3 {
            let c = g[a].floor().clamp(0.0, (self.dims[a] - 2) as f64);
            cell[a] = c as usize;
            f[a] = (g[a] - c).clamp(0.0, 1.0);
        }
        let [i, j, k] = cell;
        let c000 = self.at(i, j, k);
        let c100 = self.at(i + 1, j, k);
        let c010 = self.at(i, j + 1, k);
        let c110 = self.at(i + 1, j + 1, k);
        let c001 = self.at(i, j, k + 1);
        let c101 = self.at(i + 1, j, k + 1);
        let c011 = self.at(i, j + 1, k + 1);
        let c111 = self.at(i + 1, j + 1, k + 1);
        let [x, y, z] = f;

        let c00 = c000 + (c100 - c000) * x;
        let c10 = c010 + (c110 - c010) * x;
        let c01 = c001 + (c101 - c001) * x;
        let c11 = c011 + (c111 - c011) * x;
        let c0 = c00 + (c10 - c00) * y;
        let c1 = c01 + (c11 - c01) * y;
        let value = c0 + (c1 - c0) * z;

        let dx = ((c100 - c000) * (1.0 - y) + (c110 - c010) * y) * (1.0 - z)
            + ((c101 - c001) * (1.0 - y) + (c111 - c011) * y) * z;
        let dy = (c10 - c00) * (1.0 - z) + (c11 - c01) * z;
        let dz = c1 - c0;
        (value, Vector::new(dx, dy, dz) / self.spacing)
    }

    /// Value and gradient. Outside the lattice box the value continues as
    /// the boundary value plus the distance to the box.
    pub fn query(&self, p: &Point) -> (f64, Vector) {
        let b = self.bounds();
        if b.contains(p) {
            return self.trilinear(p);
        }
        let c = b.clamp(p);
        let d = p - c;
        let dist = d.norm();
        (self.trilinear(&c).0 + dist, d / dist)
    }

    pub fn point_inside(&self, p: &Point) -> bool {
        self.query(p).0 < 0.0
    }
}

impl DistanceField for SdfGrid {
    fn query(&self, p: &Point) -> (f64, Vector) {
        SdfGrid::query(self, p)
    }

    fn spacing(&self) -> f64 {
        self.spacing
    }
}

/// Pointwise minimum of several fields. Ties go to the earliest field.
pub struct UnionField<'a> {
    fields: Vec<&'a dyn DistanceField>,
}

impl<'a> UnionField<'a> {
    pub fn new(fields: Vec<&'a dyn DistanceField>) -> Self {
        assert!(!fields.is_empty(), "union of no fields");
        Self { fields }
    }
}

impl DistanceField for UnionField<'_> {
    fn query(&self, p: &Point) -> (f64, Vector) {
        let mut best = self.fields[0].query(p);
        for f in &self.fields[1..] {
            let q = f.query(p);
            if q.0 < best.0 {
                best = q;
            }
        }
        best
    }

    fn spacing(&self) -> f64 {
        self.fields.iter().map(|f| f.spacing()).fold(f64::INFINITY, f64::min)
    }
}
