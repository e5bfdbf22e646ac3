//! Minimal PLY codec: ASCII and binary (either endianness) input, binary
//! little-endian output. Scalar properties are decoded to `f64`; list
//! properties to `Vec<f64>` (exact for any 32-bit integer index).

use std::io::Write;

use crate::error::{Result, VizError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scalar {
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
    fn parse(s: &str) -> Result<Scalar> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(VizError::Parse(format!("unknown PLY type `{other}`"))),
        })
    }

    fn name(self) -> &'static str {
        match self {
            Scalar::I8 => "char",
            Scalar::U8 => "uchar",
            Scalar::I16 => "short",
            Scalar::U16 => "ushort",
            Scalar::I32 => "int",
            Scalar::U32 => "uint",
            Scalar::F32 => "float",
            Scalar::F64 => "double",
        }
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

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Kind {
    Scalar(Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Property {
    pub name: String,
    pub kind: Kind,
}

impl Property {
    pub fn scalar(name: &str, ty: Scalar) -> Property {
        Property {
            name: name.to_string(),
            kind: Kind::Scalar(ty),
        }
    }

    pub fn list(name: &str, count: Scalar, item: Scalar) -> Property {
        Property {
            name: name.to_string(),
            kind: Kind::List { count, item },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElementDef {
    pub name: String,
    pub count: usize,
    pub properties: Vec<Property>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Ascii,
    BinaryLittleEndian,
    BinaryBigEndian,
}

#[derive(Clone, Debug)]
pub enum Column {
    Scalar(Vec<f64>),
    List(Vec<Vec<f64>>),
}

#[derive(Clone, Debug)]
pub struct Element {
    pub def: ElementDef,
    pub columns: Vec<Column>,
}

#[derive(Clone, Debug)]
pub struct PlyData {
    pub format: Format,
    pub comments: Vec<String>,
    pub elements: Vec<Element>,
}

impl PlyData {
    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.def.name == name)
    }
}

impl Element {
    pub fn len(&self) -> usize {
        self.def.count
    }

    pub fn is_empty(&self) -> bool {
        self.def.count == 0
    }

    pub fn has(&self, prop: &str) -> bool {
        self.def.properties.iter().any(|p| p.name == prop)
    }

    pub fn scalar(&self, prop: &str) -> Option<&[f64]> {
        let i = self.def.properties.iter().position(|p| p.name == prop)?;
        match &self.columns[i] {
            Column::Scalar(v) => Some(v),
            Column::List(_) => None,
        }
    }

    pub fn list(&self, prop: &str) -> Option<&[Vec<f64>]> {
        let i = self.def.properties.iter().position(|p| p.name == prop)?;
        match &self.columns[i] {
            Column::List(v) => Some(v),
            Column::Scalar(_) => None,
        }
    }

    /// Scalar columns `names` gathered as fixed-size rows.
    pub fn vec3(&self, names: [&str; 3]) -> Option<Vec<[f64; 3]>> {
        let [a, b, c] = names.map(|n| self.scalar(n));
        let (a, b, c) = (a?, b?, c?);
        Some((0..self.len()).map(|i| [a[i], b[i], c[i]]).collect())
    }
}

fn perr(msg: impl Into<String>) -> VizError {
    VizError::Parse(msg.into())
}

/// Parses a complete PLY file held in memory.
pub fn parse(bytes: &[u8]) -> Result<PlyData> {
    let (header_end, format, comments, defs) = parse_header(bytes)?;
    let body = &bytes[header_end..];
    let elements = match format {
        Format::Ascii => read_ascii(body, defs)?,
        Format::BinaryLittleEndian => read_binary(body, defs, false)?,
        Format::BinaryBigEndian => read_binary(body, defs, true)?,
    };
    Ok(PlyData {
        format,
        comments,
        elements,
    })
}

fn parse_header(bytes: &[u8]) -> Result<(usize, Format, Vec<String>, Vec<ElementDef>)> {
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| perr("unterminated PLY header"))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| perr("non-UTF-8 PLY header"))?
            .trim_end_matches('\r')
            .to_string();
        pos += nl + 1;
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            break;
        }
    }
    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(perr("missing `ply` magic"));
    }
    let mut format = None;
    let mut comments = Vec::new();
    let mut defs: Vec<ElementDef> = Vec::new();
    for line in &lines[1..lines.len() - 1] {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                format = Some(match tok.next() {
                    Some("ascii") => Format::Ascii,
                    Some("binary_little_endian") => Format::BinaryLittleEndian,
                    Some("binary_big_endian") => Format::BinaryBigEndian,
                    other => return Err(perr(format!("unsupported PLY format {other:?}"))),
                });
            }
            Some("comment") | Some("obj_info") => {
                let text = line.trim_start();
                let body = text.split_once(char::is_whitespace).map_or("", |(_, r)| r);
                comments.push(body.trim().to_string());
            }
            Some("element") => {
                let name = tok.next().ok_or_else(|| perr("element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| perr("element without count"))?;
                defs.push(ElementDef {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let def = defs
                    .last_mut()
                    .ok_or_else(|| perr("property before element"))?;
                let first = tok.next().ok_or_else(|| perr("empty property"))?;
                let prop = if first == "list" {
                    let count = Scalar::parse(tok.next().unwrap_or(""))?;
                    let item = Scalar::parse(tok.next().unwrap_or(""))?;
                    let name = tok.next().ok_or_else(|| perr("list without name"))?;
                    Property::list(name, count, item)
                } else {
                    let ty = Scalar::parse(first)?;
                    let name = tok.next().ok_or_else(|| perr("property without name"))?;
                    Property::scalar(name, ty)
                };
                def.properties.push(prop);
            }
            Some(_) | None => {}
        }
    }
    let format = format.ok_or_else(|| perr("missing format line"))?;
    Ok((pos, format, comments, defs))
}

fn empty_columns(def: &ElementDef) -> Vec<Column> {
    def.properties
        .iter()
        .map(|p| match p.kind {
            Kind::Scalar(_) => Column::Scalar(Vec::with_capacity(def.count)),
            Kind::List { .. } => Column::List(Vec::with_capacity(def.count)),
        })
        .collect()
}

fn read_ascii(body: &[u8], defs: Vec<ElementDef>) -> Result<Vec<Element>> {
    let text = std::str::from_utf8(body).map_err(|_| perr("non-UTF-8 ASCII PLY body"))?;
    let mut tokens = text.split_ascii_whitespace();
    let mut next = || -> Result<f64> {
        let t = tokens.next().ok_or_else(|| perr("truncated ASCII PLY body"))?;
        t.parse::<f64>().map_err(|_| perr(format!("bad number `{t}`")))
    };
    let mut out = Vec::with_capacity(defs.len());
    for def in defs {
        let mut columns = empty_columns(&def);
        for _ in 0..def.count {
            for (p, col) in def.properties.iter().zip(columns.iter_mut()) {
                match (&p.kind, col) {
                    (Kind::Scalar(_), Column::Scalar(v)) => v.push(next()?),
                    (Kind::List { .. }, Column::List(v)) => {
                        let n = next()?;
                        if n < 0.0 || n.fract() != 0.0 {
                            return Err(perr("bad list length"));
                        }
                        let items = (0..n as usize).map(|_| next()).collect::<Result<Vec<_>>>()?;
                        v.push(items);
                    }
                    _ => unreachable!(),
                }
            }
        }
        out.push(Element { def, columns });
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    big_endian: bool,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| perr("truncated binary PLY body"))?;
        self.pos = end;
        let mut a: [u8; N] = slice.try_into().unwrap();
        if self.big_endian {
            a.reverse();
        }
        Ok(a)
    }

    fn read(&mut self, ty: Scalar) -> Result<f64> {
        Ok(match ty {
            Scalar::I8 => i8::from_le_bytes(self.take()?) as f64,
            Scalar::U8 => u8::from_le_bytes(self.take()?) as f64,
            Scalar::I16 => i16::from_le_bytes(self.take()?) as f64,
            Scalar::U16 => u16::from_le_bytes(self.take()?) as f64,
            Scalar::I32 => i32::from_le_bytes(self.take()?) as f64,
            Scalar::U32 => u32::from_le_bytes(self.take()?) as f64,
            Scalar::F32 => f32::from_le_bytes(self.take()?) as f64,
            Scalar::F64 => f64::from_le_bytes(self.take()?),
        })
    }
}

fn read_binary(body: &[u8], defs: Vec<ElementDef>, big_endian: bool) -> Result<Vec<Element>> {
    let mut cur = Cursor {
        bytes: body,
        pos: 0,
        big_endian,
    };
    let mut out = Vec::with_capacity(defs.len());
    for def in defs {
        let row_bytes: Option<usize> = def
            .properties
            .iter()
            .map(|p| match p.kind {
                Kind::Scalar(t) => Some(t.size()),
                Kind::List { .. } => None,
            })
            .sum();
        if let Some(rb) = row_bytes {
            if body.len().saturating_sub(cur.pos) < rb * def.count {
                return Err(perr("truncated binary PLY body"));
            }
        }
        let mut columns = empty_columns(&def);
        for _ in 0..def.count {
            for (p, col) in def.properties.iter().zip(columns.iter_mut()) {
                match (&p.kind, col) {
                    (Kind::Scalar(t), Column::Scalar(v)) => v.push(cur.read(*t)?),
                    (Kind::List { count, item }, Column::List(v)) => {
                        let n = cur.read(*count)?;
                        if n < 0.0 {
                            return Err(perr("negative list length"));
                        }
                        let items = (0..n as usize)
                            .map(|_| cur.read(*item))
                            .collect::<Result<Vec<_>>>()?;
                        v.push(items);
                    }
                    _ => unreachable!(),
                }
            }
        }
        out.push(Element { def, columns });
    }
    Ok(out)
}

/// Writes a binary little-endian header. The caller streams the body rows.
pub fn write_header(w: &mut impl Write, comments: &[String], elements: &[ElementDef]) -> std::io::Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    for c in comments {
        writeln!(w, "comment {c}")?;
    }
    for e in elements {
        writeln!(w, "element {} {}", e.name, e.count)?;
        for p in &e.properties {
            match &p.kind {
                Kind::Scalar(t) => writeln!(w, "property {} {}", t.name(), p.name)?,
                Kind::List { count, item } => {
                    writeln!(w, "property list {} {} {}", count.name(), item.name(), p.name)?
                }
            }
        }
    }
    writeln!(w, "end_header")
}

pub fn put_f32(w: &mut impl Write, v: f64) -> std::io::Result<()> {
    w.write_all(&(v as f32).to_le_bytes())
}

pub fn put_i32(w: &mut impl Write, v: i32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub fn put_u8(w: &mut impl Write, v: u8) -> std::io::Result<()> {
    w.write_all(&[v])
}
