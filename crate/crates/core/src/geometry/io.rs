//! Wavefront OBJ and PLY input, OBJ output.
//!
//! Polygons with more than three corners are fan-triangulated around their
//! first corner. Texture coordinates, normals and materials are ignored.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{GeometryError, Point, TriangleMesh};

/// Loads an OBJ or PLY file (chosen by extension) and checks that it has
/// a non-degenerate surface.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh, GeometryError> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(GeometryError::FileNotFound(path.to_path_buf()));
    }
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let (vertices, faces) = match ext.as_str() {
        "obj" => read_obj(BufReader::new(fs::File::open(path)?), path)?,
        "ply" => read_ply(BufReader::new(fs::File::open(path)?), path)?,
        other => return Err(GeometryError::UnsupportedFormat(format!("extension {other:?}"))),
    };
    let mesh = TriangleMesh::new(vertices, faces)?;
    mesh.ensure_surface()?;
    Ok(mesh)
}

fn malformed(path: &Path, reason: impl Into<String>) -> GeometryError {
    GeometryError::Malformed { path: path.to_path_buf(), reason: reason.into() }
}

fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[k], poly[k + 1]]);
    }
}

type Parsed = (Vec<Point>, Vec<[usize; 3]>);

fn read_obj(reader: impl BufRead, path: &Path) -> Result<Parsed, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for x in c.iter_mut() {
                    *x = it
                        .next()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| malformed(path, format!("line {}: bad vertex", lineno + 1)))?;
                }
                vertices.push(Point::from(c));
            }
            Some("f") => {
                poly.clear();
                for tok in it {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| malformed(path, format!("line {}: bad face index {tok:?}", lineno + 1)))?;
                    // 1-based, negative indices count back from the latest vertex.
                    let resolved = if i > 0 { i - 1 } else { vertices.len() as i64 + i };
                    if resolved < 0 {
                        return Err(malformed(path, format!("line {}: face index {i} out of range", lineno + 1)));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(malformed(path, format!("line {}: face with fewer than 3 corners", lineno + 1)));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

#[derive(Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

#[derive(Clone, Copy)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

fn read_ply(mut reader: impl BufRead, path: &Path) -> Result<Parsed, GeometryError> {
    let mut line = String::new();
    let next_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<bool, GeometryError> {
        line.clear();
        Ok(reader.read_line(line)? > 0)
    };

    next_line(&mut reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(GeometryError::UnsupportedFormat("missing ply magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        if !next_line(&mut reader, &mut line)? {
            return Err(malformed(path, "unterminated header"));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLe),
            ["format", other, _] => return Err(GeometryError::UnsupportedFormat(format!("PLY {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| malformed(path, "bad element count"))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements.last_mut().ok_or_else(|| malformed(path, "property before element"))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count).ok_or_else(|| malformed(path, "bad list count type"))?,
                    item: Scalar::parse(item).ok_or_else(|| malformed(path, "bad list item type"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| malformed(path, "property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty).ok_or_else(|| malformed(path, format!("bad property type {ty}")))?,
                });
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let format = format.ok_or_else(|| malformed(path, "missing format line"))?;

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let mut src = PlySource { format, body: &body, pos: 0, tokens: None };

    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [0.0; 3];
            let mut poly: Vec<usize> = Vec::new();
            for prop in &el.props {
                match prop {
                    Property::Scalar { name, ty } => {
                        let v = src.scalar(*ty).ok_or_else(|| malformed(path, "truncated body"))?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = src.scalar(*count).ok_or_else(|| malformed(path, "truncated body"))? as usize;
                        let keep = el.name == "face" && (name == "vertex_indices" || name == "vertex_index");
                        for _ in 0..n {
                            let v = src.scalar(*item).ok_or_else(|| malformed(path, "truncated body"))?;
                            if keep {
                                if v < 0.0 {
                                    return Err(malformed(path, "negative face index"));
                                }
                                poly.push(v as usize);
                            }
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Point::from(xyz)),
                "face" if poly.len() >= 3 => fan(&poly, &mut faces),
                "face" => return Err(malformed(path, "face with fewer than 3 corners")),
                _ => {}
            }
        }
    }
    Ok((vertices, faces))
}

struct PlySource<'a> {
    format: PlyFormat,
    body: &'a [u8],
    pos: usize,
    tokens: Option<std::str::SplitAsciiWhitespace<'a>>,
}

impl<'a> PlySource<'a> {
    fn scalar(&mut self, ty: Scalar) -> Option<f64> {
        match self.format {
            PlyFormat::BinaryLe => {
                let n = ty.size();
                let bytes = self.body.get(self.pos..self.pos + n)?;
                self.pos += n;
                Some(ty.decode(bytes))
            }
            PlyFormat::Ascii => {
                if self.tokens.is_none() {
                    self.tokens = Some(std::str::from_utf8(self.body).ok()?.split_ascii_whitespace());
                }
                self.tokens.as_mut()?.next()?.parse().ok()
            }
        }
    }
}

/// Writes a mesh as OBJ.
pub fn write_obj(mesh: &TriangleMesh, mut out: impl Write) -> std::io::Result<()> {
    write_obj_groups(&[("mesh", mesh)], &mut out)
}

/// Writes several meshes into one OBJ, each under its own `g` group.
pub fn write_obj_groups(groups: &[(&str, &TriangleMesh)], mut out: impl Write) -> std::io::Result<()> {
    let mut offset = 1;
    for (name, mesh) in groups {
        writeln!(out, "g {name}")?;
        for v in mesh.vertices() {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in mesh.faces() {
            writeln!(out, "f {} {} {}", f[0] + offset, f[1] + offset, f[2] + offset)?;
        }
        offset += mesh.vertices().len();
    }
    Ok(())
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<(), GeometryError> {
    let mut w = std::io::BufWriter::new(fs::File::create(path)?);
    write_obj(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}
