use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{SdfError, SdfGrid};
use crate::geometry::Point;

const MAGIC: &[u8; 4] = b"SDF1";

/// `SDF1`, origin (3×f64), spacing (f64), dims (3×u32), values (f32,
/// x fastest). Little-endian throughout.
pub fn write_sdf(grid: &SdfGrid, mut out: impl Write) -> Result<(), SdfError> {
    out.write_all(MAGIC)?;
    for x in grid.origin().iter() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.write_all(&grid.spacing().to_le_bytes())?;
    for d in grid.dims() {
        let d = u32::try_from(d).map_err(|_| SdfError::InvalidGrid("dimension exceeds u32".into()))?;
        out.write_all(&d.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(grid.values().len() * 4);
    for v in grid.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_exact<const N: usize>(r: &mut impl Read) -> Result<[u8; N], SdfError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => SdfError::Truncated,
        _ => SdfError::Io(e),
    })?;
    Ok(b)
}

pub fn read_sdf(mut r: impl Read) -> Result<SdfGrid, SdfError> {
    if &read_exact::<4>(&mut r)? != MAGIC {
        return Err(SdfError::BadMagic);
    }
    let mut o = [0.0; 3];
    for x in &mut o {
        *x = f64::from_le_bytes(read_exact(&mut r)?);
    }
    let spacing = f64::from_le_bytes(read_exact(&mut r)?);
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u32::from_le_bytes(read_exact(&mut r)?) as usize;
    }
    let n = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| SdfError::InvalidGrid(format!("dims {dims:?} overflow")))?;
    let mut raw = Vec::new();
    r.take(n as u64 * 4).read_to_end(&mut raw)?;
    if raw.len() != n * 4 {
        return Err(SdfError::Truncated);
    }
    let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    SdfGrid::new(Point::new(o[0], o[1], o[2]), spacing, dims, values)
}

pub fn save_sdf(grid: &SdfGrid, path: &Path) -> Result<(), SdfError> {
    write_sdf(grid, BufWriter::new(File::create(path)?))
}

pub fn load_sdf(path: &Path) -> Result<SdfGrid, SdfError> {
    read_sdf(BufReader::new(File::open(path)?))
}
