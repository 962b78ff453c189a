//! PLY files, ASCII or binary little-endian, and the point-cloud mapping on
//! top of them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use cppcn_core::geom::{Organ, Point3, PointCloud};

use crate::error::{Error, Result, ResultExt};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ascii,
    BinaryLittleEndian,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Ascii => "ascii",
            Format::BinaryLittleEndian => "binary_little_endian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarType {
    Int8,
    UInt8,
    Int16,
    UInt16,
    Int32,
    UInt32,
    Float32,
    Float64,
}

impl ScalarType {
    pub fn parse(s: &str) -> Option<ScalarType> {
        Some(match s {
            "char" | "int8" => ScalarType::Int8,
            "uchar" | "uint8" => ScalarType::UInt8,
            "short" | "int16" => ScalarType::Int16,
            "ushort" | "uint16" => ScalarType::UInt16,
            "int" | "int32" => ScalarType::Int32,
            "uint" | "uint32" => ScalarType::UInt32,
            "float" | "float32" => ScalarType::Float32,
            "double" | "float64" => ScalarType::Float64,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Int8 => "char",
            ScalarType::UInt8 => "uchar",
            ScalarType::Int16 => "short",
            ScalarType::UInt16 => "ushort",
            ScalarType::Int32 => "int",
            ScalarType::UInt32 => "uint",
            ScalarType::Float32 => "float",
            ScalarType::Float64 => "double",
        }
    }

    pub fn size(self) -> usize {
        match self {
            ScalarType::Int8 | ScalarType::UInt8 => 1,
            ScalarType::Int16 | ScalarType::UInt16 => 2,
            ScalarType::Int32 | ScalarType::UInt32 | ScalarType::Float32 => 4,
            ScalarType::Float64 => 8,
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, ScalarType::Float32 | ScalarType::Float64)
    }

    fn range(self) -> (f64, f64) {
        match self {
            ScalarType::Int8 => (i8::MIN as f64, i8::MAX as f64),
            ScalarType::UInt8 => (0.0, u8::MAX as f64),
            ScalarType::Int16 => (i16::MIN as f64, i16::MAX as f64),
            ScalarType::UInt16 => (0.0, u16::MAX as f64),
            ScalarType::Int32 => (i32::MIN as f64, i32::MAX as f64),
            ScalarType::UInt32 => (0.0, u32::MAX as f64),
            ScalarType::Float32 | ScalarType::Float64 => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Whether `v` is stored without loss.
    fn holds(self, v: f64) -> bool {
        match self {
            ScalarType::Float64 => true,
            ScalarType::Float32 => v.is_nan() || (v as f32) as f64 == v,
            _ => {
                let (lo, hi) = self.range();
                v.fract() == 0.0 && v >= lo && v <= hi
            }
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::Int8 => b[0] as i8 as f64,
            ScalarType::UInt8 => b[0] as f64,
            ScalarType::Int16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::UInt16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::Int32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::UInt32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::Float32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            ScalarType::Float64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }

    fn write_le(self, v: f64, out: &mut Vec<u8>) {
        match self {
            ScalarType::Int8 => out.push(v as i8 as u8),
            ScalarType::UInt8 => out.push(v as u8),
            ScalarType::Int16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
            ScalarType::UInt16 => out.extend_from_slice(&(v as u16).to_le_bytes()),
            ScalarType::Int32 => out.extend_from_slice(&(v as i32).to_le_bytes()),
            ScalarType::UInt32 => out.extend_from_slice(&(v as u32).to_le_bytes()),
            ScalarType::Float32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            ScalarType::Float64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }

    fn parse_ascii(self, tok: &str) -> Option<f64> {
        if self.is_float() {
            let v: f64 = tok.parse().ok()?;
            Some(if self == ScalarType::Float32 { v as f32 as f64 } else { v })
        } else {
            let v: i64 = tok.parse().ok()?;
            let v = v as f64;
            self.holds(v).then_some(v)
        }
    }

    fn write_ascii(self, v: f64, out: &mut String) {
        match self {
            ScalarType::Float32 => write!(out, "{}", v as f32),
            ScalarType::Float64 => write!(out, "{v}"),
            _ => write!(out, "{}", v as i64),
        }
        .expect("writing to a String");
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropertyKind {
    Scalar(ScalarType),
    List { count: ScalarType, item: ScalarType },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub kind: PropertyKind,
}

impl Property {
    pub fn scalar(name: &str, ty: ScalarType) -> Self {
        Property {
            name: name.into(),
            kind: PropertyKind::Scalar(ty),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Column {
    Scalar(Vec<f64>),
    List(Vec<Vec<f64>>),
}

impl Column {
    fn empty(kind: PropertyKind, cap: usize) -> Column {
        match kind {
            PropertyKind::Scalar(_) => Column::Scalar(Vec::with_capacity(cap)),
            PropertyKind::List { .. } => Column::List(Vec::with_capacity(cap)),
        }
    }

    fn len(&self) -> usize {
        match self {
            Column::Scalar(v) => v.len(),
            Column::List(v) => v.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
    /// One column per property.
    pub columns: Vec<Column>,
}

impl Element {
    pub fn column(&self, name: &str) -> Option<(&Property, &Column)> {
        let i = self.properties.iter().position(|p| p.name == name)?;
        Some((&self.properties[i], &self.columns[i]))
    }
}

/// A parsed PLY document: every element and property, values widened to f64.
#[derive(Clone, Debug, PartialEq)]
pub struct PlyData {
    pub format: Format,
    pub comments: Vec<String>,
    pub elements: Vec<Element>,
}

struct Header {
    format: Format,
    comments: Vec<String>,
    elements: Vec<Element>,
    /// Byte offset of the payload.
    body: usize,
    /// Line number of the first payload line.
    body_line: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut next_line = |pos: &mut usize| -> Option<(usize, String)> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |i| *pos + i);
        let raw = &bytes[*pos..end];
        *pos = (end + 1).min(bytes.len().max(end + 1));
        line_no += 1;
        let text = String::from_utf8_lossy(raw).trim_end_matches('\r').to_string();
        Some((line_no, text))
    };
    let err = |line: usize, msg: String| Error::parse(path, format!("line {line}"), msg);

    match next_line(&mut pos) {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(err(1, "missing `ply` magic".into())),
    }
    let mut format = None;
    let mut comments = Vec::new();
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let Some((ln, line)) = next_line(&mut pos) else {
            return Err(err(line_no, "header ends without `end_header`".into()));
        };
        let mut tok = line.split_whitespace();
        match tok.next() {
            None => continue,
            Some("end_header") => break,
            Some("comment") | Some("obj_info") => {
                let rest = line.trim_start();
                let rest = rest.split_once(char::is_whitespace).map_or("", |x| x.1);
                comments.push(rest.to_string());
            }
            Some("format") => {
                let f = match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLittleEndian,
                    Some("binary_big_endian") => return Err(err(ln, "binary_big_endian is not supported".into())),
                    other => return Err(err(ln, format!("unknown format {other:?}"))),
                };
                if tok.next() != Some("1.0") {
                    return Err(err(ln, "format version must be 1.0".into()));
                }
                format = Some(f);
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tok.next(), tok.next()) else {
                    return Err(err(ln, "expected `element <name> <count>`".into()));
                };
                let count: usize = count.parse().map_err(|_| err(ln, format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: name.into(),
                    count,
                    properties: Vec::new(),
                    columns: Vec::new(),
                });
            }
            Some("property") => {
                let Some(el) = elements.last_mut() else {
                    return Err(err(ln, "property before any element".into()));
                };
                let words: Vec<&str> = tok.collect();
                let ty = |s: &str| ScalarType::parse(s).ok_or_else(|| err(ln, format!("unknown property type `{s}`")));
                let prop = match words[..] {
                    ["list", c, i, name] => {
                        let count = ty(c)?;
                        if count.is_float() {
                            return Err(err(ln, "list count type must be an integer".into()));
                        }
                        Property {
                            name: name.into(),
                            kind: PropertyKind::List { count, item: ty(i)? },
                        }
                    }
                    [t, name] => Property::scalar(name, ty(t)?),
                    _ => return Err(err(ln, "expected `property <type> <name>`".into())),
                };
                if el.properties.iter().any(|p| p.name == prop.name) {
                    return Err(err(ln, format!("duplicate property `{}`", prop.name)));
                }
                el.columns.push(Column::empty(prop.kind, el.count.min(1 << 20)));
                el.properties.push(prop);
            }
            Some(other) => return Err(err(ln, format!("unexpected header keyword `{other}`"))),
        }
    }
    let format = format.ok_or_else(|| err(line_no, "missing `format` line".into()))?;
    Ok(Header {
        format,
        comments,
        elements,
        body: pos,
        body_line: line_no + 1,
    })
}

impl PlyData {
    /// `path` is only used to locate diagnostics.
    pub fn parse(bytes: &[u8], path: &Path) -> Result<PlyData> {
        let Header {
            format,
            comments,
            mut elements,
            body,
            body_line,
        } = parse_header(bytes, path)?;
        let payload = &bytes[body..];
        match format {
            Format::Ascii => parse_ascii(payload, body_line, &mut elements, path)?,
            Format::BinaryLittleEndian => parse_binary(payload, body, &mut elements, path)?,
        }
        Ok(PlyData {
            format,
            comments,
            elements,
        })
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, String> {
        let mut head = String::from("ply\n");
        writeln!(head, "format {} 1.0", self.format.name()).unwrap();
        for c in &self.comments {
            writeln!(head, "comment {c}").unwrap();
        }
        for e in &self.elements {
            if e.columns.len() != e.properties.len() || e.columns.iter().any(|c| c.len() != e.count) {
                return Err(format!("element `{}`: columns do not match count {}", e.name, e.count));
            }
            writeln!(head, "element {} {}", e.name, e.count).unwrap();
            for p in &e.properties {
                match p.kind {
                    PropertyKind::Scalar(t) => writeln!(head, "property {} {}", t.name(), p.name),
                    PropertyKind::List { count, item } => {
                        writeln!(head, "property list {} {} {}", count.name(), item.name(), p.name)
                    }
                }
                .unwrap();
            }
        }
        head.push_str("end_header\n");
        let mut out = head.into_bytes();
        for e in &self.elements {
            for (p, c) in e.properties.iter().zip(&e.columns) {
                let bad = |v: f64, ty: ScalarType| (!ty.holds(v)).then(|| format!("`{}.{}`: {v} does not fit {}", e.name, p.name, ty.name()));
                match (p.kind, c) {
                    (PropertyKind::Scalar(t), Column::Scalar(v)) => {
                        if let Some(m) = v.iter().find_map(|&x| bad(x, t)) {
                            return Err(m);
                        }
                    }
                    (PropertyKind::List { count, item }, Column::List(v)) => {
                        for row in v {
                            if let Some(m) = bad(row.len() as f64, count).or_else(|| row.iter().find_map(|&x| bad(x, item))) {
                                return Err(m);
                            }
                        }
                    }
                    _ => return Err(format!("`{}.{}`: column kind does not match property", e.name, p.name)),
                }
            }
            match self.format {
                Format::Ascii => {
                    let mut line = String::new();
                    for r in 0..e.count {
                        line.clear();
                        for (i, (p, c)) in e.properties.iter().zip(&e.columns).enumerate() {
                            if i > 0 {
                                line.push(' ');
                            }
                            match (p.kind, c) {
                                (PropertyKind::Scalar(t), Column::Scalar(v)) => t.write_ascii(v[r], &mut line),
                                (PropertyKind::List { item, .. }, Column::List(v)) => {
                                    write!(line, "{}", v[r].len()).unwrap();
                                    for &x in &v[r] {
                                        line.push(' ');
                                        item.write_ascii(x, &mut line);
                                    }
                                }
                                _ => unreachable!("checked above"),
                            }
                        }
                        line.push('\n');
                        out.extend_from_slice(line.as_bytes());
                    }
                }
                Format::BinaryLittleEndian => {
                    for r in 0..e.count {
                        for (p, c) in e.properties.iter().zip(&e.columns) {
                            match (p.kind, c) {
                                (PropertyKind::Scalar(t), Column::Scalar(v)) => t.write_le(v[r], &mut out),
                                (PropertyKind::List { count, item }, Column::List(v)) => {
                                    count.write_le(v[r].len() as f64, &mut out);
                                    for &x in &v[r] {
                                        item.write_le(x, &mut out);
                                    }
                                }
                                _ => unreachable!("checked above"),
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn parse_ascii(payload: &[u8], first_line: usize, elements: &mut [Element], path: &Path) -> Result<()> {
    let text = std::str::from_utf8(payload).map_err(|e| Error::parse(path, format!("line {first_line}"), format!("payload is not UTF-8: {e}")))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (first_line + i, l)).filter(|(_, l)| !l.trim().is_empty());
    for e in elements.iter_mut() {
        for r in 0..e.count {
            let Some((ln, line)) = lines.next() else {
                return Err(Error::parse(
                    path,
                    format!("line {}", first_line + text.lines().count()),
                    format!("file ends after {r} of {} `{}` rows", e.count, e.name),
                ));
            };
            let err = |m: String| Error::parse(path, format!("line {ln}"), format!("{} row {r}: {m}", e.name));
            let mut tok = line.split_whitespace();
            for (p, c) in e.properties.iter().zip(e.columns.iter_mut()) {
                let mut take = |ty: ScalarType| -> Result<f64> {
                    let t = tok.next().ok_or_else(|| err(format!("missing value for `{}`", p.name)))?;
                    ty.parse_ascii(t).ok_or_else(|| err(format!("`{t}` is not a valid {} for `{}`", ty.name(), p.name)))
                };
                match (p.kind, c) {
                    (PropertyKind::Scalar(t), Column::Scalar(v)) => v.push(take(t)?),
                    (PropertyKind::List { count, item }, Column::List(v)) => {
                        let n = take(count)?;
                        if n < 0.0 {
                            return Err(err(format!("negative list length for `{}`", p.name)));
                        }
                        let row = (0..n as usize).map(|_| take(item)).collect::<Result<Vec<_>>>()?;
                        v.push(row);
                    }
                    _ => unreachable!("columns built from properties"),
                }
            }
            if let Some(t) = tok.next() {
                return Err(err(format!("unexpected extra value `{t}`")));
            }
        }
    }
    if let Some((ln, _)) = lines.next() {
        return Err(Error::parse(path, format!("line {ln}"), "data after the last declared element"));
    }
    Ok(())
}

fn parse_binary(payload: &[u8], base: usize, elements: &mut [Element], path: &Path) -> Result<()> {
    let mut pos = 0usize;
    for e in elements.iter_mut() {
        for r in 0..e.count {
            for (p, c) in e.properties.iter().zip(e.columns.iter_mut()) {
                let take = |ty: ScalarType, pos: &mut usize| -> Result<f64> {
                    let s = ty.size();
                    if *pos + s > payload.len() {
                        return Err(Error::parse(
                            path,
                            format!("byte {}", base + *pos),
                            format!("file ends inside `{}` row {r} of {} (property `{}`)", e.name, e.count, p.name),
                        ));
                    }
                    let v = ty.read_le(&payload[*pos..*pos + s]);
                    *pos += s;
                    Ok(v)
                };
                match (p.kind, c) {
                    (PropertyKind::Scalar(t), Column::Scalar(v)) => v.push(take(t, &mut pos)?),
                    (PropertyKind::List { count, item }, Column::List(v)) => {
                        let at = base + pos;
                        let n = take(count, &mut pos)?;
                        if n < 0.0 {
                            return Err(Error::parse(path, format!("byte {at}"), format!("negative list length in `{}` row {r}", e.name)));
                        }
                        let row = (0..n as usize).map(|_| take(item, &mut pos)).collect::<Result<Vec<_>>>()?;
                        v.push(row);
                    }
                    _ => unreachable!("columns built from properties"),
                }
            }
        }
    }
    if pos != payload.len() {
        return Err(Error::parse(
            path,
            format!("byte {}", base + pos),
            format!("{} bytes after the last declared element", payload.len() - pos),
        ));
    }
    Ok(())
}

pub const ORGAN: &str = "organ_class";
pub const PLANT_ID: &str = "plant_id";
pub const OCCLUDED: &str = "occluded";
pub const SYNTHETIC: &str = "synthetic";

/// A point cloud file: coordinates and known label channels mapped onto
/// [`PointCloud`], everything else carried through untouched.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudFile {
    pub cloud: PointCloud,
    pub coord_type: ScalarType,
    pub comments: Vec<String>,
    /// Unrecognised vertex properties in file order.
    pub extra: Vec<(Property, Column)>,
    /// Elements other than `vertex`.
    pub other_elements: Vec<Element>,
}

impl CloudFile {
    pub fn new(cloud: PointCloud) -> Self {
        CloudFile {
            cloud,
            coord_type: ScalarType::Float32,
            comments: Vec::new(),
            extra: Vec::new(),
            other_elements: Vec::new(),
        }
    }

    pub fn from_ply(data: PlyData, path: &Path) -> Result<CloudFile> {
        let mut other = Vec::new();
        let mut vertex = None;
        for e in data.elements {
            if e.name == "vertex" && vertex.is_none() {
                vertex = Some(e);
            } else {
                other.push(e);
            }
        }
        let v = vertex.ok_or_else(|| Error::parse(path, "header", "no `vertex` element"))?;
        let loc = |m: String| Error::parse(path, "vertex", m);
        let mut coords: [Option<&Vec<f64>>; 3] = [None; 3];
        let mut coord_type = None;
        let mut organ = None;
        let mut plant = None;
        let mut occluded = None;
        let mut synthetic = None;
        let mut extra = Vec::new();
        for (p, c) in v.properties.iter().zip(&v.columns) {
            let scalar = match (p.kind, c) {
                (PropertyKind::Scalar(t), Column::Scalar(col)) => Some((t, col)),
                _ => None,
            };
            let axis = ["x", "y", "z"].iter().position(|&a| a == p.name);
            match (axis, p.name.as_str(), scalar) {
                (Some(a), _, Some((t, col))) => {
                    if !t.is_float() {
                        return Err(loc(format!("coordinate `{}` must be float or double", p.name)));
                    }
                    if coord_type.is_some_and(|c| c != t) {
                        return Err(loc("coordinates have mixed types".into()));
                    }
                    coord_type = Some(t);
                    coords[a] = Some(col);
                }
                (Some(_), _, None) => return Err(loc(format!("coordinate `{}` must be a scalar", p.name))),
                (None, ORGAN, Some((t, col))) if !t.is_float() => organ = Some(col),
                (None, PLANT_ID, Some((t, col))) if !t.is_float() => plant = Some(col),
                (None, OCCLUDED, Some((t, col))) if !t.is_float() => occluded = Some(col),
                (None, SYNTHETIC, Some((t, col))) if !t.is_float() => synthetic = Some(col),
                _ => extra.push((p.clone(), c.clone())),
            }
        }
        let [Some(x), Some(y), Some(z)] = coords else {
            return Err(loc("vertex needs x, y and z".into()));
        };
        let pts: Vec<Point3> = (0..v.count).map(|i| Point3::new(x[i], y[i], z[i])).collect();
        if let Some(i) = pts.iter().position(|p| !p.is_finite()) {
            return Err(loc(format!("row {i}: non-finite coordinate")));
        }
        let mut cloud = PointCloud::new(pts).map_err(|e| Error::data(path, e))?;
        if let Some(col) = organ {
            let o = col
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    Organ::from_code(c as u8)
                        .filter(|_| (0.0..=255.0).contains(&c))
                        .ok_or_else(|| loc(format!("row {i}: {ORGAN} {c} is not a known organ code")))
                })
                .collect::<Result<Vec<_>>>()?;
            cloud = cloud.with_organ(o).map_err(|e| Error::data(path, e))?;
        }
        if let Some(col) = plant {
            let ids = col
                .iter()
                .enumerate()
                .map(|(i, &c)| if c >= 0.0 { Ok(c as u32) } else { Err(loc(format!("row {i}: negative {PLANT_ID}"))) })
                .collect::<Result<Vec<_>>>()?;
            cloud = cloud.with_plant_ids(ids).map_err(|e| Error::data(path, e))?;
        }
        let flags = |col: &Vec<f64>, name: &str| {
            col.iter()
                .enumerate()
                .map(|(i, &c)| match c {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    _ => Err(loc(format!("row {i}: {name} must be 0 or 1, got {c}"))),
                })
                .collect::<Result<Vec<_>>>()
        };
        if let Some(col) = occluded {
            cloud = cloud.with_occluded(flags(col, OCCLUDED)?).map_err(|e| Error::data(path, e))?;
        }
        if let Some(col) = synthetic {
            cloud = cloud.with_synthetic(flags(col, SYNTHETIC)?).map_err(|e| Error::data(path, e))?;
        }
        Ok(CloudFile {
            cloud,
            coord_type: coord_type.unwrap_or(ScalarType::Float32),
            comments: data.comments,
            extra,
            other_elements: other,
        })
    }

    pub fn to_ply(&self, format: Format) -> PlyData {
        let c = &self.cloud;
        let n = c.len();
        let mut props = Vec::new();
        let mut cols = Vec::new();
        for (a, name) in ["x", "y", "z"].iter().enumerate() {
            props.push(Property::scalar(name, self.coord_type));
            let round = |v: f64| if self.coord_type == ScalarType::Float32 { v as f32 as f64 } else { v };
            cols.push(Column::Scalar(c.points().iter().map(|p| round(p.to_array()[a])).collect()));
        }
        if let Some(o) = c.organ() {
            props.push(Property::scalar(ORGAN, ScalarType::UInt8));
            cols.push(Column::Scalar(o.iter().map(|o| o.code() as f64).collect()));
        }
        if let Some(ids) = c.plant_ids() {
            props.push(Property::scalar(PLANT_ID, ScalarType::Int32));
            cols.push(Column::Scalar(ids.iter().map(|&i| i as f64).collect()));
        }
        let flag = |v: &[bool]| Column::Scalar(v.iter().map(|&b| b as u8 as f64).collect());
        if let Some(f) = c.occluded() {
            props.push(Property::scalar(OCCLUDED, ScalarType::UInt8));
            cols.push(flag(f));
        }
        if let Some(f) = c.synthetic() {
            props.push(Property::scalar(SYNTHETIC, ScalarType::UInt8));
            cols.push(flag(f));
        }
        for (p, col) in &self.extra {
            props.push(p.clone());
            cols.push(col.clone());
        }
        let mut elements = vec![Element {
            name: "vertex".into(),
            count: n,
            properties: props,
            columns: cols,
        }];
        elements.extend(self.other_elements.iter().cloned());
        PlyData {
            format,
            comments: self.comments.clone(),
            elements,
        }
    }
}

pub fn read_ply(path: &Path) -> Result<PlyData> {
    let bytes = fs::read(path).at(path)?;
    PlyData::parse(&bytes, path)
}

pub fn read_cloud_file(path: &Path) -> Result<CloudFile> {
    CloudFile::from_ply(read_ply(path)?, path)
}

pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    Ok(read_cloud_file(path)?.cloud)
}

pub fn write_cloud_file(path: &Path, file: &CloudFile, format: Format) -> Result<()> {
    let bytes = file.to_ply(format).to_bytes().map_err(|m| Error::parse(path, "write", m))?;
    fs::write(path, bytes).at(path)
}

pub fn write_cloud(path: &Path, cloud: &PointCloud, format: Format) -> Result<()> {
    write_cloud_file(path, &CloudFile::new(cloud.clone()), format)
}
