//! Procedural test and demo shapes. All closed shapes are watertight with
//! outward-facing windings.

use std::collections::HashMap;

use crate::geom::Vec3;
use crate::mesh::TriangleMesh;

/// Welds vertices by exact coordinates while quads are appended.
#[derive(Default)]
struct Builder {
    vertices: Vec<Vec3>,
    lookup: HashMap<[u64; 3], u32>,
    triangles: Vec<[u32; 3]>,
}

impl Builder {
    fn vertex(&mut self, p: Vec3) -> u32 {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            (self.vertices.len() - 1) as u32
        })
    }

    /// Quad with corners counter-clockwise as seen from the side its normal faces.
    fn quad(&mut self, corners: [Vec3; 4]) {
        let [a, b, c, d] = corners.map(|p| self.vertex(p));
        self.triangles.push([a, b, c]);
        self.triangles.push([a, c, d]);
    }

    fn finish(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.triangles).expect("procedural mesh is valid")
    }
}

/// Faces of the box `[lo, hi]`, oriented outward (or inward when `inward`),
/// optionally leaving the +z face out.
fn box_faces(b: &mut Builder, lo: Vec3, hi: Vec3, inward: bool, open_top: bool) {
    let p = |x: bool, y: bool, z: bool| {
        Vec3::new(
            if x { hi.x } else { lo.x },
            if y { hi.y } else { lo.y },
            if z { hi.z } else { lo.z },
        )
    };
    let (f, t) = (false, true);
    let mut faces = vec![
        [p(f, f, f), p(f, t, f), p(t, t, f), p(t, f, f)],
        [p(f, f, f), p(t, f, f), p(t, f, t), p(f, f, t)],
        [p(f, t, f), p(f, t, t), p(t, t, t), p(t, t, f)],
        [p(f, f, f), p(f, f, t), p(f, t, t), p(f, t, f)],
        [p(t, f, f), p(t, t, f), p(t, t, t), p(t, f, t)],
    ];
    if !open_top {
        faces.push([p(f, f, t), p(t, f, t), p(t, t, t), p(f, t, t)]);
    }
    for mut q in faces {
        if inward {
            q.reverse();
        }
        b.quad(q);
    }
}

/// Axis-aligned box with the given full extents, centered at `center`.
pub fn cuboid(extents: Vec3, center: Vec3) -> TriangleMesh {
    let mut b = Builder::default();
    box_faces(&mut b, center - extents * 0.5, center + extents * 0.5, false, false);
    b.finish()
}

/// Thick-walled box open at +z: a closed solid whose cavity is reachable from above.
pub fn open_cup(extents: Vec3, wall: f64, center: Vec3) -> TriangleMesh {
    assert!(wall > 0.0 && 2.0 * wall < extents.x.min(extents.y) && wall < extents.z);
    let lo = center - extents * 0.5;
    let hi = center + extents * 0.5;
    let ilo = Vec3::new(lo.x + wall, lo.y + wall, lo.z + wall);
    let ihi = Vec3::new(hi.x - wall, hi.y - wall, hi.z);
    let mut b = Builder::default();
    box_faces(&mut b, lo, hi, false, true);
    box_faces(&mut b, ilo, ihi, true, true);
    let z = hi.z;
    let o = |x: f64, y: f64| Vec3::new(x, y, z);
    b.quad([o(lo.x, lo.y), o(hi.x, lo.y), o(ihi.x, ilo.y), o(ilo.x, ilo.y)]);
    b.quad([o(hi.x, lo.y), o(hi.x, hi.y), o(ihi.x, ihi.y), o(ihi.x, ilo.y)]);
    b.quad([o(hi.x, hi.y), o(lo.x, hi.y), o(ilo.x, ihi.y), o(ihi.x, ihi.y)]);
    b.quad([o(lo.x, hi.y), o(lo.x, lo.y), o(ilo.x, ilo.y), o(ilo.x, ihi.y)]);
    b.finish()
}

/// Icosahedron subdivided `subdivisions` times and projected onto the sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    let verts = verts.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(verts, tris).expect("icosphere is valid")
}

/// Unit-size square in the plane `z = height`, spanning `[0, 1]²`, normal +z.
pub fn square(height: f64) -> TriangleMesh {
    let mut b = Builder::default();
    b.quad([
        Vec3::new(0.0, 0.0, height),
        Vec3::new(1.0, 0.0, height),
        Vec3::new(1.0, 1.0, height),
        Vec3::new(0.0, 1.0, height),
    ]);
    b.finish()
}

/// `count` parallel unit squares perpendicular to `axis` (0 = x, 1 = y),
/// evenly spread over `[0, 1]`, each with normal `+axis`.
pub fn plane_stack(axis: usize, count: usize) -> TriangleMesh {
    assert!(axis < 2 && count > 0);
    let mut b = Builder::default();
    for i in 0..count {
        let s = (i as f64 + 0.5) / count as f64;
        let q = if axis == 0 {
            [
                Vec3::new(s, 0.0, 0.0),
                Vec3::new(s, 1.0, 0.0),
                Vec3::new(s, 1.0, 1.0),
                Vec3::new(s, 0.0, 1.0),
            ]
        } else {
            [
                Vec3::new(0.0, s, 0.0),
                Vec3::new(0.0, s, 1.0),
                Vec3::new(1.0, s, 1.0),
                Vec3::new(1.0, s, 0.0),
            ]
        };
        b.quad(q);
    }
    b.finish()
}

/// The reference shapes: sphere r=0.5, box 0.8×0.6×0.4 and an open cup
/// 0.8×0.8×0.6 with walls 0.05 thick, all centred at the origin.
pub fn reference_shapes() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("sphere", icosphere(0.5, 4)),
        ("box", cuboid(Vec3::new(0.8, 0.6, 0.4), Vec3::zeros())),
        ("cup", open_cup(Vec3::new(0.8, 0.8, 0.6), 0.05, Vec3::zeros())),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_shapes_are_watertight_with_positive_volume() {
        let cube = cuboid(Vec3::repeat(1.0), Vec3::zeros());
        assert_eq!(cube.triangle_count(), 12);
        assert!(cube.is_watertight());
        assert!((cube.volume() - 1.0).abs() < 1e-12);
        assert_eq!(cube.euler_characteristic(), 2);

        let sphere = icosphere(0.5, 4);
        assert_eq!(sphere.triangle_count(), 5120);
        assert!(sphere.is_watertight());
        assert_eq!(sphere.euler_characteristic(), 2);
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * 0.125;
        assert!(sphere.volume() < analytic && sphere.volume() > 0.99 * analytic);

        let cup = open_cup(Vec3::new(0.8, 0.8, 0.6), 0.05, Vec3::zeros());
        assert!(cup.is_watertight(), "{:?}", cup.edge_audit());
        assert_eq!(cup.euler_characteristic(), 2);
        let expected = 0.8 * 0.8 * 0.6 - 0.7 * 0.7 * 0.55;
        assert!((cup.volume() - expected).abs() < 1e-12);
    }

    #[test]
    fn normals_point_outward() {
        let cube = cuboid(Vec3::repeat(1.0), Vec3::zeros());
        for t in 0..cube.triangle_count() {
            let [a, b, c] = cube.corners(t);
            let centroid = (a + b + c) / 3.0;
            assert!(cube.normal(t).dot(&centroid) > 0.0);
        }
    }

    #[test]
    fn open_shapes_are_not_watertight() {
        let s = square(0.0);
        let audit = s.edge_audit();
        assert_eq!(audit.boundary, 4);
        assert!(!s.is_watertight());
    }
}
