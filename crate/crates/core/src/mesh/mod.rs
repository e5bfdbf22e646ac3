//! Indexed triangle meshes with BVH-accelerated queries.

mod bvh;
pub mod io;
pub mod primitives;

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use rayon::prelude::*;

use crate::error::{Result, VizError};
use crate::geom::{Aabb, Similarity, Vec3};
use crate::rng;

use bvh::Bvh;

pub use io::{load_mesh, save_mesh, LoadedMesh};

/// Squared-area threshold (in a frame whose longest extent is 1) below which a
/// loaded triangle is dropped as degenerate.
pub const DEGENERATE_SQ_AREA: f64 = 1e-12;

/// Retries with fresh directions before an inside query gives up.
pub const INSIDE_RETRIES: usize = 8;

const INSIDE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub point: Vec3,
    pub t: f64,
    pub triangle: usize,
    pub normal: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub point: Vec3,
    pub normal: Vec3,
    pub triangle: usize,
}

/// Result of the edge-count audit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeAudit {
    pub edges: usize,
    /// Edges used by a single triangle.
    pub boundary: usize,
    /// Edges used by more than two triangles.
    pub non_manifold: usize,
    /// Edges used twice in the same direction (inconsistent winding).
    pub misoriented: usize,
}

impl EdgeAudit {
    pub fn is_watertight(&self) -> bool {
        self.edges > 0 && self.boundary == 0 && self.non_manifold == 0 && self.misoriented == 0
    }
}

/// Immutable triangle surface. Normals, areas and the BVH are derived at
/// construction; all queries take `&self` and are safe to run concurrently.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    areas: Vec<f64>,
    aabb: Aabb,
    bvh: Bvh,
}

impl TriangleMesh {
    /// Builds a mesh, dropping only triangles with exactly zero area.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        Self::with_tolerance(vertices, triangles, 0.0).map(|(m, _)| m)
    }

    /// Builds a mesh, dropping triangles whose squared area is at most
    /// `sq_area_tol · L⁴` (`L` = longest extent of the vertex box).
    /// Returns the mesh and the number of dropped triangles.
    pub fn with_tolerance(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        sq_area_tol: f64,
    ) -> Result<(Self, usize)> {
        let count = vertices.len();
        for (ti, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= count {
                    return Err(VizError::IndexOutOfRange {
                        triangle: ti,
                        index: i as usize,
                        count,
                    });
                }
            }
        }
        let scale = Aabb::from_points(&vertices).longest_extent();
        let threshold = if scale.is_finite() && scale > 0.0 {
            sq_area_tol * scale.powi(4)
        } else {
            sq_area_tol
        };
        let input = triangles.len();
        let mut kept = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        for tri in triangles {
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let sq_area = cross.norm_squared() * 0.25;
            if !(sq_area > threshold) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                continue;
            }
            let len = cross.norm();
            kept.push(tri);
            normals.push(cross / len);
            areas.push(0.5 * len);
        }
        let dropped = input - kept.len();
        let tri_bounds: Vec<Aabb> = kept
            .iter()
            .map(|t| Aabb::from_points(t.iter().map(|&i| &vertices[i as usize])))
            .collect();
        let bvh = Bvh::build(&tri_bounds);
        let aabb = Aabb::from_points(kept.iter().flatten().map(|&i| &vertices[i as usize]));
        let mesh = TriangleMesh {
            vertices,
            triangles: kept,
            normals,
            areas,
            aabb,
            bvh,
        };
        Ok((mesh, dropped))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Outward unit normal of triangle `t` (right-hand rule on its winding).
    pub fn normal(&self, t: usize) -> Vec3 {
        self.normals[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        self.triangles[t].map(|i| self.vertices[i as usize])
    }

    /// Bounding box of the vertices referenced by triangles.
    pub fn aabb(&self) -> Aabb {
        self.aabb
    }

    fn epsilon(&self) -> f64 {
        1e-9 * self.aabb.diagonal().max(f64::MIN_POSITIVE)
    }

    /// Enclosed volume (divergence theorem); meaningful for closed meshes.
    pub fn volume(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn edge_audit(&self) -> EdgeAudit {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.triangles.len() * 3);
        for tri in &self.triangles {
            for k in 0..3 {
                *directed.entry((tri[k], tri[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut audit = EdgeAudit::default();
        for (&(a, b), &fwd) in &directed {
            let rev = directed.get(&(b, a)).copied().unwrap_or(0);
            // Count each undirected edge once.
            if rev > 0 && (b, a) < (a, b) {
                continue;
            }
            audit.edges += 1;
            let uses = fwd + rev;
            if uses == 1 {
                audit.boundary += 1;
            } else if uses > 2 {
                audit.non_manifold += 1;
            } else if fwd != 1 || rev != 1 {
                audit.misoriented += 1;
            }
        }
        audit
    }

    pub fn is_watertight(&self) -> bool {
        self.edge_audit().is_watertight()
    }

    /// V − E + F over the vertices referenced by triangles.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for tri in &self.triangles {
            for &i in tri {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        let e = self.edge_audit().edges as i64;
        v - e + self.triangles.len() as i64
    }

    pub fn transformed(&self, sim: &Similarity) -> Result<TriangleMesh> {
        let verts = self.vertices.iter().map(|p| sim.apply(p)).collect();
        TriangleMesh::new(verts, self.triangles.clone())
    }

    /// Same surface with every winding reversed (normals flipped).
    pub fn flipped(&self) -> TriangleMesh {
        let tris = self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect();
        TriangleMesh::new(self.vertices.clone(), tris).expect("flipping preserves validity")
    }

    /// Concatenates two meshes without welding.
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let off = self.vertices.len() as u32;
        let mut verts = self.vertices.clone();
        verts.extend_from_slice(&other.vertices);
        let mut tris = self.triangles.clone();
        tris.extend(other.triangles.iter().map(|t| t.map(|i| i + off)));
        TriangleMesh::new(verts, tris).expect("merging preserves validity")
    }

    /// Nearest hit with `t > ε` (ε = 1e-9 × scene diagonal).
    pub fn ray_intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        let eps = self.epsilon();
        let mut best: Option<(f64, usize)> = None;
        self.bvh.traverse_ray(origin, dir, f64::INFINITY, |tri, t_max| {
            match ray_triangle(origin, dir, &self.corners(tri), 0.0) {
                Some(h) if h.t > eps => {
                    let better = match best {
                        None => true,
                        Some((bt, bi)) => h.t < bt || (h.t == bt && tri < bi),
                    };
                    if better {
                        best = Some((h.t, tri));
                        return h.t;
                    }
                    t_max
                }
                _ => t_max,
            }
        });
        best.map(|(t, tri)| self.hit(origin, dir, t, tri))
    }

    /// Reference intersection over all triangles, without the BVH.
    pub fn ray_intersect_brute(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        let eps = self.epsilon();
        let mut best: Option<(f64, usize)> = None;
        for tri in 0..self.triangles.len() {
            if let Some(h) = ray_triangle(origin, dir, &self.corners(tri), 0.0) {
                if h.t > eps && best.is_none_or(|(bt, _)| h.t < bt) {
                    best = Some((h.t, tri));
                }
            }
        }
        best.map(|(t, tri)| self.hit(origin, dir, t, tri))
    }

    fn hit(&self, origin: &Vec3, dir: &Vec3, t: f64, tri: usize) -> RayHit {
        RayHit {
            point: origin + dir * t,
            t,
            triangle: tri,
            normal: self.normals[tri],
        }
    }

    /// Point-in-volume test by crossing parity. Numerically ambiguous rays
    /// (coincident crossings or edge grazes) are retried along fresh random
    /// directions; after [`INSIDE_RETRIES`] retries the query fails.
    pub fn is_inside(&self, p: &Vec3) -> Result<bool> {
        let key = p.x.to_bits() ^ p.y.to_bits().rotate_left(21) ^ p.z.to_bits().rotate_left(42);
        for attempt in 0..=INSIDE_RETRIES {
            let dir = if attempt == 0 {
                Vec3::new(0.267_261_24, 0.534_522_48, 0.801_783_73).normalize()
            } else {
                let mut r = rng::stream(key, rng::domain::INSIDE_RETRY, attempt as u64);
                Vec3::from(UnitSphere.sample(&mut r))
            };
            if let Some(odd) = self.crossing_parity(p, &dir) {
                return Ok(odd);
            }
        }
        Err(VizError::UnresolvableQuery(p.x, p.y, p.z))
    }

    /// `Some(odd)` for a clean ray, `None` if the ray is numerically degenerate.
    fn crossing_parity(&self, origin: &Vec3, dir: &Vec3) -> Option<bool> {
        let mut ts: Vec<f64> = Vec::new();
        let mut degenerate = false;
        self.bvh.traverse_ray(origin, dir, f64::INFINITY, |tri, t_max| {
            if degenerate {
                return t_max;
            }
            if let Some(h) = ray_triangle(origin, dir, &self.corners(tri), INSIDE_TOL) {
                if h.near_edge || h.t.abs() < INSIDE_TOL {
                    degenerate = true;
                } else if h.t > 0.0 {
                    ts.push(h.t);
                }
            }
            t_max
        });
        if degenerate {
            return None;
        }
        ts.sort_by(f64::total_cmp);
        if ts.windows(2).any(|w| (w[1] - w[0]).abs() < INSIDE_TOL) {
            return None;
        }
        Some(ts.len() % 2 == 1)
    }

    /// Closest triangle to `p` (lowest index on ties) with the squared distance.
    pub fn closest_triangle(&self, p: &Vec3) -> Option<(usize, f64)> {
        self.bvh.nearest(p, |t| {
            let [a, b, c] = self.corners(t);
            (closest_point_on_triangle(p, &a, &b, &c) - p).norm_squared()
        })
    }

    pub fn distance_to_surface(&self, p: &Vec3) -> Option<f64> {
        self.closest_triangle(p).map(|(_, d2)| d2.sqrt())
    }

    /// Area-weighted uniform samples; deterministic in `seed`, independent of threads.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
        self.sample_surface_in(n, seed, rng::domain::SURFACE)
    }

    pub(crate) fn sample_surface_in(&self, n: usize, seed: u64, domain: u64) -> Result<Vec<SurfaceSample>> {
        if self.is_empty() {
            return Err(VizError::EmptyMesh);
        }
        if n == 0 {
            return Err(VizError::invalid("sample count must be positive"));
        }
        let mut cdf = Vec::with_capacity(self.areas.len());
        let mut acc = 0.0;
        for a in &self.areas {
            acc += a;
            cdf.push(acc);
        }
        let total = acc;
        Ok((0..n)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(seed, domain, i as u64);
                let pick = r.random::<f64>() * total;
                let tri = cdf.partition_point(|&c| c <= pick).min(cdf.len() - 1);
                let (mut u, mut v): (f64, f64) = (r.random(), r.random());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                let [a, b, c] = self.corners(tri);
                SurfaceSample {
                    point: a + (b - a) * u + (c - a) * v,
                    normal: self.normals[tri],
                    triangle: tri,
                }
            })
            .collect())
    }

    /// Sphere centered on the box center, radius half the box diagonal.
    pub fn bounding_sphere(&self) -> Result<Sphere> {
        let b = self.nonempty_aabb()?;
        if b.diagonal() <= 0.0 {
            return Err(VizError::ZeroExtent);
        }
        Ok(Sphere {
            center: b.center(),
            radius: 0.5 * b.diagonal(),
        })
    }

    /// Ray-target sphere: box center, radius half the shortest box extent.
    /// Stands in for the sphere inscribed in the convex hull.
    pub fn inscribed_target_sphere(&self) -> Result<Sphere> {
        let b = self.nonempty_aabb()?;
        if b.shortest_extent() <= 0.0 {
            return Err(VizError::ZeroExtent);
        }
        Ok(Sphere {
            center: b.center(),
            radius: 0.5 * b.shortest_extent(),
        })
    }

    fn nonempty_aabb(&self) -> Result<Aabb> {
        if self.is_empty() {
            return Err(VizError::EmptyMesh);
        }
        Ok(self.aabb)
    }
}

/// Centers the box at the origin and scales its longest extent to exactly 1.
pub fn normalize_unit_cube(mesh: &TriangleMesh) -> Result<(TriangleMesh, Similarity)> {
    if mesh.is_empty() {
        return Err(VizError::EmptyMesh);
    }
    let b = mesh.aabb();
    let longest = b.longest_extent();
    if longest <= 0.0 {
        return Err(VizError::ZeroExtent);
    }
    let scale = 1.0 / longest;
    let c = b.center();
    let sim = Similarity {
        scale,
        translation: (-c * scale).into(),
    };
    Ok((mesh.transformed(&sim)?, sim))
}

pub(crate) struct TriHit {
    pub t: f64,
    pub near_edge: bool,
}

/// Möller–Trumbore. With `tol > 0`, hits whose barycentric coordinates lie
/// within `tol` of an edge are reported with `near_edge` set.
pub(crate) fn ray_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3], tol: f64) -> Option<TriHit> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - tri[0];
    let u = tvec.dot(&pvec) * inv;
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    let w = 1.0 - u - v;
    let lo = u.min(v).min(w);
    if lo < -tol {
        return None;
    }
    let t = e2.dot(&qvec) * inv;
    Some(TriHit {
        t,
        near_edge: tol > 0.0 && lo < tol,
    })
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
