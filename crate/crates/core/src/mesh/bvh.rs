//! Bounding volume hierarchy over triangles.

use crate::geom::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: index of the first primitive in `prims`. Inner: index of the right child
    /// (the left child always directly follows its parent).
    offset: u32,
    /// Number of primitives for a leaf, zero for an inner node.
    count: u32,
}

#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    prims: Vec<u32>,
}

impl Bvh {
    pub fn build(tri_bounds: &[Aabb]) -> Bvh {
        if tri_bounds.is_empty() {
            return Bvh::default();
        }
        let centroids: Vec<Vec3> = tri_bounds.iter().map(Aabb::center).collect();
        let mut prims: Vec<u32> = (0..tri_bounds.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tri_bounds.len() / LEAF_SIZE + 1);
        build_rec(tri_bounds, &centroids, &mut prims, 0, &mut nodes);
        Bvh { nodes, prims }
    }

    /// Calls `visit` for every primitive whose leaf box intersects the ray segment
    /// `[0, t_max]`. `visit` returns a possibly shrunk `t_max`.
    pub fn traverse_ray(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        mut t_max: f64,
        mut visit: impl FnMut(usize, f64) -> f64,
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = dir.map(|c| 1.0 / c);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_interval(origin, &inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.offset as usize;
                for &p in &self.prims[start..start + node.count as usize] {
                    t_max = visit(p as usize, t_max);
                }
            } else {
                stack.push(node.offset as usize);
                stack.push(ni + 1);
            }
        }
    }

    /// Best-first search for the primitive minimizing `dist2(prim)`, pruning with
    /// box distances. Ties resolve to the lowest primitive index.
    pub fn nearest(&self, p: &Vec3, mut dist2: impl FnMut(usize) -> f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut stack: Vec<(f64, usize)> = vec![(self.nodes[0].bounds.distance_squared(p), 0)];
        while let Some((bd, ni)) = stack.pop() {
            if best.is_some_and(|(_, b)| bd > b) {
                continue;
            }
            let node = &self.nodes[ni];
            if node.count > 0 {
                let start = node.offset as usize;
                for &prim in &self.prims[start..start + node.count as usize] {
                    let prim = prim as usize;
                    let d = dist2(prim);
                    let better = match best {
                        None => true,
                        Some((bi, b)) => d < b || (d == b && prim < bi),
                    };
                    if better {
                        best = Some((prim, d));
                    }
                }
            } else {
                let l = ni + 1;
                let r = node.offset as usize;
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[r].bounds.distance_squared(p);
                // Push the farther child first so the nearer one is expanded next.
                if dl <= dr {
                    stack.push((dr, r));
                    stack.push((dl, l));
                } else {
                    stack.push((dl, l));
                    stack.push((dr, r));
                }
            }
        }
        best
    }
}

fn build_rec(
    tri_bounds: &[Aabb],
    centroids: &[Vec3],
    prims: &mut [u32],
    first: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let bounds = prims
        .iter()
        .fold(Aabb::EMPTY, |b, &i| b.union(&tri_bounds[i as usize]));
    let index = nodes.len();
    if prims.len() <= LEAF_SIZE {
        nodes.push(Node {
            bounds,
            offset: first as u32,
            count: prims.len() as u32,
        });
        return index;
    }
    let cbounds = Aabb::from_points(prims.iter().map(|&i| &centroids[i as usize]));
    let axis = cbounds.extent().imax();
    let mid = prims.len() / 2;
    prims.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .total_cmp(&centroids[b as usize][axis])
            .then(a.cmp(&b))
    });
    nodes.push(Node {
        bounds,
        offset: 0,
        count: 0,
    });
    let (left, right) = prims.split_at_mut(mid);
    build_rec(tri_bounds, centroids, left, first, nodes);
    let r = build_rec(tri_bounds, centroids, right, first + mid, nodes);
    nodes[index].offset = r as u32;
    index
}
