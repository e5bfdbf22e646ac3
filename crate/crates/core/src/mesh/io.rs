//! Mesh file input (PLY, OBJ) and output (binary PLY).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Result, VizError};
use crate::geom::Vec3;
use crate::mesh::{TriangleMesh, DEGENERATE_SQ_AREA};
use crate::ply::{self, ElementDef, Property, Scalar};

#[derive(Debug)]
pub struct LoadedMesh {
    pub mesh: TriangleMesh,
    /// Degenerate triangles removed while loading.
    pub dropped: usize,
}

pub fn load_mesh(path: &Path) -> Result<LoadedMesh> {
    let bytes = fs::read(path).map_err(|e| VizError::io(path, e))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(VizError::NoGeometry);
    }
    let (vertices, triangles) = if bytes.starts_with(b"ply") {
        read_ply_geometry(&bytes)?
    } else {
        read_obj(&bytes)?
    };
    if triangles.is_empty() {
        return Err(VizError::NoGeometry);
    }
    let (mesh, dropped) = TriangleMesh::with_tolerance(vertices, triangles, DEGENERATE_SQ_AREA)?;
    if mesh.is_empty() {
        return Err(VizError::NoGeometry);
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} degenerate triangle(s)", path.display());
    }
    Ok(LoadedMesh { mesh, dropped })
}

fn fan(poly: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..poly.len().saturating_sub(1) {
        out.push([poly[0], poly[k], poly[k + 1]]);
    }
}

fn to_index(v: f64) -> Result<u32> {
    if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
        return Err(VizError::Parse(format!("bad vertex index {v}")));
    }
    Ok(v as u32)
}

fn read_ply_geometry(bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let data = ply::parse(bytes)?;
    let vertex = data.element("vertex").ok_or(VizError::NoGeometry)?;
    let vertices = vertex
        .vec3(["x", "y", "z"])
        .ok_or_else(|| VizError::Parse("vertex element lacks x/y/z".into()))?
        .into_iter()
        .map(Vec3::from)
        .collect();
    let mut triangles = Vec::new();
    if let Some(face) = data.element("face") {
        let lists = face
            .list("vertex_indices")
            .or_else(|| face.list("vertex_index"))
            .ok_or_else(|| VizError::Parse("face element lacks vertex_indices".into()))?;
        for l in lists {
            let poly = l.iter().map(|&v| to_index(v)).collect::<Result<Vec<_>>>()?;
            fan(&poly, &mut triangles);
        }
    }
    Ok((vertices, triangles))
}

fn read_obj(bytes: &[u8]) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let text = std::str::from_utf8(bytes).map_err(|_| VizError::Parse("OBJ is not UTF-8".into()))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let c: Vec<f64> = tok
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| VizError::Parse(format!("line {}: bad vertex", ln + 1)))?;
                if c.len() != 3 {
                    return Err(VizError::Parse(format!("line {}: vertex needs 3 coordinates", ln + 1)));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tok {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| VizError::Parse(format!("line {}: bad face index `{t}`", ln + 1)))?;
                    // OBJ indices are 1-based; negative values count back from the end.
                    let idx = if i > 0 { i - 1 } else { vertices.len() as i64 + i };
                    if idx < 0 {
                        return Err(VizError::Parse(format!("line {}: face index {i} out of range", ln + 1)));
                    }
                    poly.push(idx as u32);
                }
                fan(&poly, &mut triangles);
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}

/// Writes binary little-endian PLY: float32 `x y z`, `list uchar int vertex_indices`.
pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| VizError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_mesh(mesh, &mut w).map_err(|e| VizError::io(path, e))?;
    w.flush().map_err(|e| VizError::io(path, e))
}

pub fn write_mesh(mesh: &TriangleMesh, w: &mut impl Write) -> std::io::Result<()> {
    let defs = [
        ElementDef {
            name: "vertex".into(),
            count: mesh.vertices().len(),
            properties: vec![
                Property::scalar("x", Scalar::F32),
                Property::scalar("y", Scalar::F32),
                Property::scalar("z", Scalar::F32),
            ],
        },
        ElementDef {
            name: "face".into(),
            count: mesh.triangle_count(),
            properties: vec![Property::list("vertex_indices", Scalar::U8, Scalar::I32)],
        },
    ];
    ply::write_header(w, &[], &defs)?;
    for v in mesh.vertices() {
        for c in v.iter() {
            ply::put_f32(w, *c)?;
        }
    }
    for t in mesh.triangles() {
        ply::put_u8(w, 3)?;
        for &i in t {
            ply::put_i32(w, i as i32)?;
        }
    }
    Ok(())
}
