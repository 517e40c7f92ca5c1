//! Minimal PLY reader/writer (ASCII and binary little-endian).
//!
//! Reads vertex positions, optional RGB (uchar or float) and polygon faces; other
//! elements and properties are skipped. Faces with more than three vertices are
//! fan-triangulated. Errors carry the byte offset where parsing failed.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
    fn parse(s: &str) -> Option<Scalar> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Ascii,
    BinaryLe,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlyData {
    pub vertices: Vec<Vec3>,
    /// Per-vertex RGB in `[0, 1]`.
    pub colors: Option<Vec<[f32; 3]>>,
    pub triangles: Vec<[u32; 3]>,
}

/// Decodes an 8-bit channel; the same expression is used on both the read and quantize paths.
pub fn u8_to_unit(c: u8) -> f32 {
    c as f32 / 255.0
}

pub fn unit_to_u8(c: f32) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Snaps a color onto the 8-bit grid so it survives a PLY roundtrip unchanged.
pub fn quantize_color(c: [f32; 3]) -> [f32; 3] {
    c.map(|v| u8_to_unit(unit_to_u8(v)))
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn line(&mut self) -> Result<(usize, &'a str)> {
        let start = self.pos;
        let rest = &self.data[start..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::parse(start, "unexpected end of header"))?;
        self.pos = start + end + 1;
        let s = std::str::from_utf8(&rest[..end]).map_err(|_| Error::parse(start, "header is not valid UTF-8"))?;
        Ok((start, s.trim_end_matches('\r')))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::parse(self.pos, "unexpected end of data"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn binary(&mut self, ty: Scalar) -> Result<f64> {
        let b = self.take(ty.size())?;
        Ok(match ty {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b.try_into().unwrap()),
        })
    }

    fn ascii_token(&mut self) -> Result<(usize, &'a str)> {
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::parse(start, "unexpected end of data"));
        }
        let s = std::str::from_utf8(&self.data[start..self.pos]).map_err(|_| Error::parse(start, "invalid UTF-8 in body"))?;
        Ok((start, s))
    }

    fn ascii(&mut self) -> Result<f64> {
        let (off, tok) = self.ascii_token()?;
        tok.parse::<f64>()
            .map_err(|_| Error::parse(off, format!("invalid number `{tok}`")))
    }

    fn value(&mut self, fmt: Format, ty: Scalar) -> Result<f64> {
        match fmt {
            Format::Ascii => self.ascii(),
            Format::BinaryLe => self.binary(ty),
        }
    }
}

pub fn read_ply(data: &[u8]) -> Result<PlyData> {
    let mut cur = Cursor { data, pos: 0 };
    let (off, magic) = cur.line()?;
    if magic != "ply" {
        return Err(Error::parse(off, "missing `ply` magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (off, line) = cur.line()?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLe,
                    other => return Err(Error::parse(off, format!("unsupported format {other:?}"))),
                });
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| Error::parse(off, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| Error::parse(off, "element without a valid count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| Error::parse(off, "property before any element"))?;
                let t = tok.next().ok_or_else(|| Error::parse(off, "property without type"))?;
                if t == "list" {
                    let count = tok.next().and_then(Scalar::parse);
                    let item = tok.next().and_then(Scalar::parse);
                    let name = tok.next();
                    match (count, item, name) {
                        (Some(count), Some(item), Some(name)) => el.props.push(Property::List {
                            name: name.to_string(),
                            count,
                            item,
                        }),
                        _ => return Err(Error::parse(off, "malformed list property")),
                    }
                } else {
                    let ty = Scalar::parse(t).ok_or_else(|| Error::parse(off, format!("unknown property type `{t}`")))?;
                    let name = tok.next().ok_or_else(|| Error::parse(off, "property without name"))?;
                    el.props.push(Property::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => return Err(Error::parse(off, format!("unexpected header keyword `{other}`"))),
        }
    }
    let fmt = format.ok_or_else(|| Error::parse(0, "missing format line"))?;

    let mut out = PlyData::default();
    for el in &elements {
        match el.name.as_str() {
            "vertex" => read_vertices(&mut cur, fmt, el, &mut out)?,
            "face" => read_faces(&mut cur, fmt, el, &mut out)?,
            _ => skip_element(&mut cur, fmt, el)?,
        }
    }
    let n = out.vertices.len() as u64;
    if let Some(t) = out.triangles.iter().find(|t| t.iter().any(|&i| i as u64 >= n)) {
        return Err(Error::parse(cur.pos, format!("face references vertex out of range: {t:?}")));
    }
    Ok(out)
}

fn read_vertices(cur: &mut Cursor<'_>, fmt: Format, el: &Element, out: &mut PlyData) -> Result<()> {
    let find = |n: &str| {
        el.props
            .iter()
            .position(|p| matches!(p, Property::Scalar { name, .. } if name == n))
    };
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::parse(cur.pos, "vertex element lacks x/y/z")),
    };
    let rgb = match (find("red"), find("green"), find("blue")) {
        (Some(r), Some(g), Some(b)) => Some([r, g, b]),
        _ => None,
    };
    let mut colors = Vec::new();
    let mut vals = vec![0.0; el.props.len()];
    for _ in 0..el.count {
        let start = cur.pos;
        for (k, p) in el.props.iter().enumerate() {
            vals[k] = match p {
                Property::Scalar { ty, .. } => cur.value(fmt, *ty)?,
                Property::List { count, item, .. } => {
                    let n = cur.value(fmt, *count)? as usize;
                    for _ in 0..n {
                        cur.value(fmt, *item)?;
                    }
                    0.0
                }
            };
        }
        let v = Vec3::new(vals[ix], vals[iy], vals[iz]);
        if !v.is_finite() {
            return Err(Error::parse(start, "non-finite vertex position"));
        }
        out.vertices.push(v);
        if let Some(c) = rgb {
            let mut col = [0f32; 3];
            for (j, &k) in c.iter().enumerate() {
                col[j] = match &el.props[k] {
                    Property::Scalar { ty: Scalar::F32 | Scalar::F64, .. } => vals[k] as f32,
                    _ => u8_to_unit(vals[k].clamp(0.0, 255.0) as u8),
                };
            }
            colors.push(col);
        }
    }
    if rgb.is_some() {
        out.colors = Some(colors);
    }
    Ok(())
}

fn read_faces(cur: &mut Cursor<'_>, fmt: Format, el: &Element, out: &mut PlyData) -> Result<()> {
    let list = el
        .props
        .iter()
        .position(|p| matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index"));
    let Some(list) = list else {
        return Err(Error::parse(cur.pos, "face element lacks vertex_indices"));
    };
    let mut idx = Vec::new();
    for _ in 0..el.count {
        let start = cur.pos;
        for (k, p) in el.props.iter().enumerate() {
            match p {
                Property::Scalar { ty, .. } => {
                    cur.value(fmt, *ty)?;
                }
                Property::List { count, item, .. } => {
                    let n = cur.value(fmt, *count)?;
                    if n < 0.0 {
                        return Err(Error::parse(start, "negative list length"));
                    }
                    idx.clear();
                    for _ in 0..n as usize {
                        let v = cur.value(fmt, *item)?;
                        if v < 0.0 || v.fract() != 0.0 {
                            return Err(Error::parse(start, "invalid vertex index"));
                        }
                        idx.push(v as u32);
                    }
                    if k == list {
                        if idx.len() < 3 {
                            return Err(Error::parse(start, "face with fewer than three vertices"));
                        }
                        for j in 1..idx.len() - 1 {
                            out.triangles.push([idx[0], idx[j], idx[j + 1]]);
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

fn skip_element(cur: &mut Cursor<'_>, fmt: Format, el: &Element) -> Result<()> {
    for _ in 0..el.count {
        for p in &el.props {
            match p {
                Property::Scalar { ty, .. } => {
                    cur.value(fmt, *ty)?;
                }
                Property::List { count, item, .. } => {
                    let n = cur.value(fmt, *count)? as usize;
                    for _ in 0..n {
                        cur.value(fmt, *item)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Binary little-endian PLY with double positions and optional uchar colors.
pub fn write_ply(vertices: &[Vec3], colors: Option<&[[f32; 3]]>, triangles: &[[u32; 3]]) -> Vec<u8> {
    let mut out = Vec::new();
    writeln!(out, "ply").unwrap();
    writeln!(out, "format binary_little_endian 1.0").unwrap();
    writeln!(out, "element vertex {}", vertices.len()).unwrap();
    for c in ["x", "y", "z"] {
        writeln!(out, "property double {c}").unwrap();
    }
    if colors.is_some() {
        for c in ["red", "green", "blue"] {
            writeln!(out, "property uchar {c}").unwrap();
        }
    }
    if !triangles.is_empty() {
        writeln!(out, "element face {}", triangles.len()).unwrap();
        writeln!(out, "property list uchar uint vertex_indices").unwrap();
    }
    writeln!(out, "end_header").unwrap();
    for (i, v) in vertices.iter().enumerate() {
        for c in v.to_array() {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(col) = colors {
            out.extend(col[i].iter().map(|&c| unit_to_u8(c)));
        }
    }
    for t in triangles {
        out.push(3);
        for &i in t {
            out.extend_from_slice(&i.to_le_bytes());
        }
    }
    out
}
