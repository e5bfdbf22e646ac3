//! Marching cubes over a node-valued scalar grid.
//!
//! The case table is derived at first use rather than transcribed: on every
//! cube face the crossed edges are paired into segments (ambiguous faces keep
//! the two inside corners apart), the segments are oriented so that the face
//! normal crossed with the segment points from inside to outside, and the
//! resulting closed loops are fan-triangulated. Neighbouring cells make the
//! same choice on their shared face, so the output is closed wherever the
//! iso-surface stays away from the grid boundary.

use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::Result;
use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Key {
    Edge(u64),
    /// Centre of the loop through these edges in the given cell.
    Center([usize; 3], Vec<Key>),
}

/// Interpolation parameters are kept this far from the edge endpoints.
const T_CLAMP: f64 = 1e-6;

/// Corner `c` has offset `(c & 1, c >> 1 & 1, c >> 2 & 1)`.
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// Local edge `axis * 4 + j` joins corner `EDGE_BASE[axis][j]` to the corner
/// one step along `axis`.
const EDGE_BASE: [[usize; 4]; 3] = [[0, 2, 4, 6], [0, 1, 4, 5], [0, 1, 2, 3]];

fn edge_corners(e: usize) -> (usize, usize) {
    let (axis, j) = (e / 4, e % 4);
    let a = EDGE_BASE[axis][j];
    (a, a | (1 << axis))
}

fn edge_between(a: usize, b: usize) -> usize {
    let (lo, hi) = (a.min(b), a.max(b));
    let axis = (hi ^ lo).trailing_zeros() as usize;
    axis * 4 + EDGE_BASE[axis].iter().position(|&c| c == lo).expect("corners share an edge")
}

/// Cube faces as cyclic corner lists with their outward normals.
const FACES: [([usize; 4], [f64; 3]); 6] = [
    ([0, 2, 6, 4], [-1.0, 0.0, 0.0]),
    ([1, 3, 7, 5], [1.0, 0.0, 0.0]),
    ([0, 1, 5, 4], [0.0, -1.0, 0.0]),
    ([2, 3, 7, 6], [0.0, 1.0, 0.0]),
    ([0, 1, 3, 2], [0.0, 0.0, -1.0]),
    ([4, 5, 7, 6], [0.0, 0.0, 1.0]),
];

fn edge_midpoint(e: usize) -> Vec3 {
    let (a, b) = edge_corners(e);
    let (pa, pb) = (corner_offset(a), corner_offset(b));
    Vec3::new(
        (pa[0] + pb[0]) as f64 / 2.0,
        (pa[1] + pb[1]) as f64 / 2.0,
        (pa[2] + pb[2]) as f64 / 2.0,
    )
}

fn corner_point(c: usize) -> Vec3 {
    let p = corner_offset(c);
    Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)
}

/// Loops and triangles (as local edge triples) for an inside-corner bitmask.
fn build_case(mask: usize) -> Case {
    let inside = |c: usize| mask & (1 << c) != 0;
    let mut next = [usize::MAX; 12];
    for (corners, normal) in FACES {
        let normal = Vec3::from(normal);
        let mut segments: Vec<(usize, usize, usize)> = Vec::new();
        let count = corners.iter().filter(|&&c| inside(c)).count();
        if count == 2 && inside(corners[0]) == inside(corners[2]) {
            // Ambiguous: cut off each inside corner on its own.
            for k in 0..4 {
                let c = corners[k];
                if inside(c) {
                    let prev = corners[(k + 3) % 4];
                    let succ = corners[(k + 1) % 4];
                    segments.push((edge_between(prev, c), edge_between(c, succ), c));
                }
            }
        } else if count > 0 && count < 4 {
            let crossed: Vec<usize> = (0..4)
                .filter(|&k| inside(corners[k]) != inside(corners[(k + 1) % 4]))
                .map(|k| edge_between(corners[k], corners[(k + 1) % 4]))
                .collect();
            let c = *corners.iter().find(|&&c| inside(c)).expect("an inside corner");
            segments.push((crossed[0], crossed[1], c));
        }
        for (p, q, c) in segments {
            let (mp, mq) = (edge_midpoint(p), edge_midpoint(q));
            let away = (mp + mq) / 2.0 - corner_point(c);
            if normal.cross(&(mq - mp)).dot(&away) > 0.0 {
                next[p] = q;
            } else {
                next[q] = p;
            }
        }
    }
    let mut seen = [false; 12];
    let mut case = Case::default();
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut lp = vec![start];
        seen[start] = true;
        let mut e = next[start];
        while e != start {
            seen[e] = true;
            lp.push(e);
            e = next[e];
        }
        triangulate(&lp, case.loops.len() as u8, &mut case.triangles);
        case.loops.push(lp.iter().map(|&e| e as u8).collect());
    }
    case
}

fn share_face(a: usize, b: usize) -> bool {
    let (a0, a1) = edge_corners(a);
    let (b0, b1) = edge_corners(b);
    FACES
        .iter()
        .any(|(c, _)| c.contains(&a0) && c.contains(&a1) && c.contains(&b0) && c.contains(&b1))
}

/// Fans the loop from a vertex none of whose diagonals joins two crossings on
/// one face (a neighbouring cell could pick the same diagonal, making the edge
/// non-manifold). Without such a vertex the loop is fanned around its centre.
fn triangulate(lp: &[usize], loop_id: u8, out: &mut Vec<[u8; 3]>) {
    let n = lp.len();
    let apex = (0..n).find(|&a| (2..n - 1).all(|k| !share_face(lp[a], lp[(a + k) % n])));
    match apex {
        Some(a) => {
            for k in 1..n - 1 {
                out.push([lp[a] as u8, lp[(a + k) % n] as u8, lp[(a + k + 1) % n] as u8]);
            }
        }
        None => {
            let c = CENTER + loop_id;
            for k in 0..n {
                out.push([c, lp[k] as u8, lp[(k + 1) % n] as u8]);
            }
        }
    }
}

/// Triangle corners at or above this value name the centre of loop
/// `value - CENTER` rather than a cube edge.
const CENTER: u8 = 12;

#[derive(Default)]
struct Case {
    loops: Vec<Vec<u8>>,
    triangles: Vec<[u8; 3]>,
}

fn table() -> &'static [Case] {
    static TABLE: OnceLock<Vec<Case>> = OnceLock::new();
    TABLE.get_or_init(|| (0..256).map(build_case).collect())
}

/// Extracts the `iso` level set of a scalar field sampled at the nodes
/// `origin + (i, j, k) * h`, `values[i + n * (j + n * k)]`. Points with value
/// above `iso` are inside; normals point outward.
pub fn extract(n: usize, origin: &Vec3, h: f64, values: &[f64], iso: f64) -> Result<TriangleMesh> {
    assert_eq!(values.len(), n * n * n);
    let table = table();
    let node = |i: usize, j: usize, k: usize| i + n * (j + n * k);
    let cells = n.saturating_sub(1);
    let edge_key = |cell: [usize; 3], e: usize| {
        let (a, _) = edge_corners(e);
        let o = corner_offset(a);
        Key::Edge(node(cell[0] + o[0], cell[1] + o[1], cell[2] + o[2]) as u64 * 3 + (e as u64 / 4))
    };
    let slabs: Vec<Vec<[Key; 3]>> = (0..cells)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..cells {
                for i in 0..cells {
                    let mut mask = 0;
                    for c in 0..8 {
                        let o = corner_offset(c);
                        if values[node(i + o[0], j + o[1], k + o[2])] > iso {
                            mask |= 1 << c;
                        }
                    }
                    let case = &table[mask];
                    for tri in &case.triangles {
                        out.push(tri.map(|e| {
                            if e >= CENTER {
                                let lp = (e - CENTER) as usize;
                                Key::Center([i, j, k], case.loops[lp].iter().map(|&e| edge_key([i, j, k], e as usize)).collect())
                            } else {
                                edge_key([i, j, k], e as usize)
                            }
                        }));
                    }
                }
            }
            out
        })
        .collect();

    let edge_point = |edge: u64| {
        let (start, axis) = ((edge / 3) as usize, (edge % 3) as usize);
        let mut step = [0; 3];
        step[axis] = 1;
        let (i, j, k) = (start % n, (start / n) % n, start / (n * n));
        let end = node(i + step[0], j + step[1], k + step[2]);
        let (va, vb) = (values[start], values[end]);
        let t = ((iso - va) / (vb - va)).clamp(T_CLAMP, 1.0 - T_CLAMP);
        let mut p = origin + Vec3::new(i as f64, j as f64, k as f64) * h;
        p[axis] += t * h;
        p
    };
    let mut ids: HashMap<Key, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for tri in slabs.into_iter().flatten() {
        triangles.push(tri.map(|key| {
            if let Some(&id) = ids.get(&key) {
                return id;
            }
            let p = match &key {
                Key::Edge(e) => edge_point(*e),
                Key::Center(_, around) => {
                    around
                        .iter()
                        .map(|k| match k {
                            Key::Edge(e) => edge_point(*e),
                            Key::Center(..) => unreachable!("loops hold edges only"),
                        })
                        .sum::<Vec3>()
                        / around.len() as f64
                }
            };
            vertices.push(p);
            let id = (vertices.len() - 1) as u32;
            ids.insert(key, id);
            id
        }));
    }
    if triangles.is_empty() {
        log::warn!("iso-surface is empty");
    }
    TriangleMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_table_shape() {
        let t = table();
        assert!(t[0].triangles.is_empty() && t[255].triangles.is_empty());
        assert_eq!(t[1].triangles.len(), 1);
        for mask in 1..255 {
            assert!(!t[mask].triangles.is_empty());
        }
    }

    #[test]
    fn single_corner_normal_points_away_from_it() {
        let mut v = vec![-1.0; 8];
        v[0] = 1.0;
        let m = extract(2, &Vec3::zeros(), 1.0, &v, 0.0).unwrap();
        assert_eq!(m.triangle_count(), 1);
        let n = m.normal(0);
        assert!(n.x > 0.0 && n.y > 0.0 && n.z > 0.0);
    }

    #[test]
    fn every_case_closes_inside_a_padded_block() {
        // Each configuration embedded in a 4³ grid with an outside border is a
        // closed surface.
        for mask in 1..255usize {
            let n = 4;
            let mut v = vec![-1.0; n * n * n];
            for c in 0..8 {
                if mask & (1 << c) != 0 {
                    let o = corner_offset(c);
                    v[(1 + o[0]) + n * ((1 + o[1]) + n * (1 + o[2]))] = 1.0;
                }
            }
            let m = extract(n, &Vec3::zeros(), 1.0, &v, 0.0).unwrap();
            assert!(m.is_watertight(), "case {mask}");
            assert!(m.volume() > 0.0, "case {mask}");
        }
    }

    #[test]
    fn random_fields_give_closed_surfaces() {
        use crate::rng;
        use rand::Rng;
        let n = 10;
        for seed in 0..40 {
            let mut r = rng::stream(seed, 11, 0);
            let mut v = vec![-1.0; n * n * n];
            for k in 1..n - 1 {
                for j in 1..n - 1 {
                    for i in 1..n - 1 {
                        v[i + n * (j + n * k)] = r.random_range(-1.0..1.0);
                    }
                }
            }
            let m = extract(n, &Vec3::zeros(), 1.0, &v, 0.0).unwrap();
            assert!(m.is_watertight(), "seed {seed}: {:?}", m.edge_audit());
            assert!(m.volume() > 0.0);
        }
    }
}
