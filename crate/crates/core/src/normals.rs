//! Normal estimation by local plane fitting, and three ways of orienting the
//! result: minimum-spanning-tree propagation, facing the sensor, or copying
//! ground-truth face normals.

use std::collections::VecDeque;

use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VizError};
use crate::geom::Vec3;
use crate::kdtree::KdTree;
use crate::mesh::TriangleMesh;
use crate::scanner::ScannedPointCloud;

pub const DEFAULT_K: usize = 16;

/// Relative eigenvalue below which a neighbourhood counts as rank-deficient.
const RANK_TOL: f64 = 1e-12;

/// Dot products this close to zero are not flipped by sensor orientation.
pub const SENSOR_TIE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Orientation {
    None,
    Mst,
    Sensor,
    Gt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrientedNormals {
    pub normals: Vec<Vec3>,
    pub orientation_method: Orientation,
    /// Connected components of the neighbour graph (MST orientation only).
    pub components: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatedNormals {
    pub normals: Vec<Vec3>,
    /// Points whose neighbourhood had rank < 2 and took a neighbour's normal.
    pub degenerate: Vec<bool>,
}

impl EstimatedNormals {
    pub fn unoriented(self) -> OrientedNormals {
        OrientedNormals {
            normals: self.normals,
            orientation_method: Orientation::None,
            components: 0,
        }
    }
}

fn plane_fit(points: &[Vec3], neighbours: impl Iterator<Item = usize> + Clone) -> (Vec3, bool) {
    let n = neighbours.clone().count() as f64;
    let mean = neighbours.clone().map(|i| points[i]).sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    for i in neighbours {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    let eig = SymmetricEigen::new(cov / n);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let degenerate = !(eig.eigenvalues[order[1]] > RANK_TOL * largest) || !(largest > 0.0);
    (eig.eigenvectors.column(order[0]).normalize(), degenerate)
}

/// Least-eigenvalue direction of the covariance of each point's `k` nearest
/// neighbours (the point included). Sign is arbitrary.
pub fn estimate_normals(points: &[Vec3], k: usize) -> Result<EstimatedNormals> {
    if k < 3 {
        return Err(VizError::invalid("normal estimation needs k >= 3"));
    }
    if points.len() < k {
        return Err(VizError::invalid(format!(
            "normal estimation needs at least k={k} points, got {}",
            points.len()
        )));
    }
    let tree = KdTree::new(points);
    let fits: Vec<(Vec3, bool)> = points
        .par_iter()
        .map(|p| {
            let near = tree.knn(p, k);
            plane_fit(points, near.iter().map(|n| n.index))
        })
        .collect();
    let degenerate: Vec<bool> = fits.iter().map(|f| f.1).collect();
    let mut normals: Vec<Vec3> = fits.iter().map(|f| f.0).collect();
    if degenerate.iter().any(|&d| d) && degenerate.iter().any(|&d| !d) {
        let fixed: Vec<Vec3> = (0..points.len())
            .into_par_iter()
            .map(|i| {
                if !degenerate[i] {
                    return normals[i];
                }
                let src = tree.nearest_where(&points[i], |j| !degenerate[j]).expect("a valid normal exists");
                normals[src.index]
            })
            .collect();
        normals = fixed;
    }
    Ok(EstimatedNormals { normals, degenerate })
}

struct DisjointSet(Vec<usize>);

impl DisjointSet {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

/// Propagates a consistent sign along the minimum spanning tree of the k-NN
/// graph weighted by `1 - |n_i·n_j|`. Each component is rooted at its highest
/// point, whose normal is made to point up.
pub fn orient_mst(points: &[Vec3], normals: &[Vec3], k: usize) -> Result<OrientedNormals> {
    if points.len() != normals.len() {
        return Err(VizError::invalid("normal count differs from point count"));
    }
    if k == 0 {
        return Err(VizError::invalid("MST orientation needs k >= 1"));
    }
    let n = points.len();
    let tree = KdTree::new(points);
    let mut edges: Vec<(f64, u32, u32)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            tree.knn(&points[i], k + 1)
                .into_iter()
                .filter(move |nb| nb.index != i)
                .take(k)
                .map(move |nb| {
                    let (a, b) = (i.min(nb.index), i.max(nb.index));
                    (1.0 - normals[a].dot(&normals[b]).abs(), a as u32, b as u32)
                })
        })
        .collect();
    edges.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    edges.dedup_by(|x, y| x.1 == y.1 && x.2 == y.2);

    let mut set = DisjointSet((0..n).collect());
    let mut adjacency = vec![Vec::new(); n];
    for &(_, a, b) in &edges {
        if set.union(a as usize, b as usize) {
            adjacency[a as usize].push(b as usize);
            adjacency[b as usize].push(a as usize);
        }
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }

    // Highest point of each component, lowest index on ties.
    let mut root_of = vec![usize::MAX; n];
    for i in 0..n {
        let r = set.find(i);
        let best = root_of[r];
        if best == usize::MAX || points[i].z > points[best].z {
            root_of[r] = i;
        }
    }

    let mut out = normals.to_vec();
    let mut visited = vec![false; n];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for i in 0..n {
        if set.find(i) != i {
            continue;
        }
        components += 1;
        let root = root_of[i];
        if out[root].z < 0.0 {
            out[root] = -out[root];
        }
        visited[root] = true;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for &w in &adjacency[u] {
                if !visited[w] {
                    visited[w] = true;
                    if out[w].dot(&out[u]) < 0.0 {
                        out[w] = -out[w];
                    }
                    queue.push_back(w);
                }
            }
        }
    }
    if components > 1 {
        log::info!("MST orientation: {components} disconnected components oriented independently");
    }
    Ok(OrientedNormals {
        normals: out,
        orientation_method: Orientation::Mst,
        components,
    })
}

/// Flips each normal to face the sensor that observed its point.
pub fn orient_sensor(pc: &ScannedPointCloud, normals: &[Vec3]) -> Result<OrientedNormals> {
    if pc.len() != normals.len() {
        return Err(VizError::invalid("normal count differs from point count"));
    }
    let v = crate::augment::sightline_vectors(pc)?;
    let normals = normals
        .iter()
        .zip(&v)
        .map(|(n, v)| if n.dot(v) <= -SENSOR_TIE { -n } else { *n })
        .collect();
    Ok(OrientedNormals {
        normals,
        orientation_method: Orientation::Sensor,
        components: 0,
    })
}

/// Outward face normal of the triangle nearest each point.
pub fn gt_normals(points: &[Vec3], mesh: &TriangleMesh) -> Result<OrientedNormals> {
    if mesh.is_empty() {
        return Err(VizError::EmptyMesh);
    }
    let normals = points
        .par_iter()
        .map(|p| mesh.normal(mesh.closest_triangle(p).expect("mesh is not empty").0))
        .collect();
    Ok(OrientedNormals {
        normals,
        orientation_method: Orientation::Gt,
        components: 0,
    })
}
