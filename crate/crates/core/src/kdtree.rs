//! Exact k-d tree over 3D points.
//!
//! The tree is implicit: point indices are permuted in place so that every
//! range `[lo, hi)` stores its splitting point at `mid = (lo + hi) / 2`.
//! Ties in distance always resolve to the lower original index, which keeps
//! every query deterministic and equal to a brute-force scan.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geom::Vec3;

const LEAF: usize = 8;

pub struct KdTree<'a> {
    points: &'a [Vec3],
    order: Vec<u32>,
    axes: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist2: f64,
}

impl Neighbor {
    fn key_cmp(&self, other: &Neighbor) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        assert!(points.len() < u32::MAX as usize);
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut axes = vec![0u8; points.len()];
        build(points, &mut order, &mut axes, 0);
        KdTree {
            points,
            order,
            axes,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &'a [Vec3] {
        self.points
    }

    /// Nearest point to `q`, or `None` for an empty tree.
    pub fn nearest(&self, q: &Vec3) -> Option<Neighbor> {
        self.nearest_where(q, |_| true)
    }

    /// Nearest point whose index differs from `skip`.
    pub fn nearest_other(&self, q: &Vec3, skip: usize) -> Option<Neighbor> {
        self.nearest_where(q, |i| i != skip)
    }

    pub fn nearest_where(&self, q: &Vec3, accept: impl Fn(usize) -> bool) -> Option<Neighbor> {
        let mut best: Option<Neighbor> = None;
        self.nearest_rec(q, 0, self.order.len(), &accept, &mut best);
        best
    }

    fn consider(&self, q: &Vec3, slot: usize, accept: &impl Fn(usize) -> bool, best: &mut Option<Neighbor>) {
        let index = self.order[slot] as usize;
        if !accept(index) {
            return;
        }
        let cand = Neighbor {
            index,
            dist2: (self.points[index] - q).norm_squared(),
        };
        if best.is_none_or(|b| cand.key_cmp(&b) == Ordering::Less) {
            *best = Some(cand);
        }
    }

    fn nearest_rec(
        &self,
        q: &Vec3,
        lo: usize,
        hi: usize,
        accept: &impl Fn(usize) -> bool,
        best: &mut Option<Neighbor>,
    ) {
        if hi - lo <= LEAF {
            for slot in lo..hi {
                self.consider(q, slot, accept, best);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let split = self.points[self.order[mid] as usize][axis];
        let diff = q[axis] - split;
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.nearest_rec(q, first.0, first.1, accept, best);
        self.consider(q, mid, accept, best);
        if best.is_none_or(|b| diff * diff <= b.dist2) {
            self.nearest_rec(q, second.0, second.1, accept, best);
        }
    }

    /// The `k` nearest points sorted by increasing distance (index breaks ties).
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<Neighbor> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(q, 0, self.order.len(), k, &mut heap);
        let mut out = heap.into_vec();
        out.sort();
        out
    }

    fn knn_push(&self, q: &Vec3, slot: usize, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        let index = self.order[slot] as usize;
        let cand = Neighbor {
            index,
            dist2: (self.points[index] - q).norm_squared(),
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
    }

    fn knn_rec(&self, q: &Vec3, lo: usize, hi: usize, k: usize, heap: &mut BinaryHeap<Neighbor>) {
        if hi - lo <= LEAF {
            for slot in lo..hi {
                self.knn_push(q, slot, k, heap);
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.axes[mid] as usize;
        let split = self.points[self.order[mid] as usize][axis];
        let diff = q[axis] - split;
        let (first, second) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_rec(q, first.0, first.1, k, heap);
        self.knn_push(q, mid, k, heap);
        if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
            self.knn_rec(q, second.0, second.1, k, heap);
        }
    }
}

fn build(points: &[Vec3], order: &mut [u32], axes: &mut [u8], offset: usize) {
    let n = order.len();
    if n <= LEAF {
        return;
    }
    let mut min = Vec3::repeat(f64::INFINITY);
    let mut max = Vec3::repeat(f64::NEG_INFINITY);
    for &i in order.iter() {
        min = min.inf(&points[i as usize]);
        max = max.sup(&points[i as usize]);
    }
    let axis = (max - min).imax();
    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .total_cmp(&points[b as usize][axis])
            .then(a.cmp(&b))
    });
    axes[offset + mid] = axis as u8;
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, axes, offset);
    build(points, &mut rest[1..], axes, offset + mid + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    fn brute_knn(points: &[Vec3], q: &Vec3, k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = points
            .iter()
            .enumerate()
            .map(|(index, p)| Neighbor {
                index,
                dist2: (p - q).norm_squared(),
            })
            .collect();
        all.sort();
        all.truncate(k);
        all
    }

    #[test]
    fn nearest_matches_brute_force() {
        let pts = random_points(2000, 1);
        let tree = KdTree::new(&pts);
        for q in random_points(300, 2) {
            let got = tree.nearest(&q).unwrap();
            let want = brute_knn(&pts, &q, 1)[0];
            assert_eq!(got, want);
        }
    }

    #[test]
    fn knn_matches_brute_force() {
        let pts = random_points(1500, 3);
        let tree = KdTree::new(&pts);
        for q in random_points(100, 4) {
            assert_eq!(tree.knn(&q, 16), brute_knn(&pts, &q, 16));
        }
    }

    #[test]
    fn duplicates_break_ties_by_index() {
        let p = Vec3::new(0.5, 0.5, 0.5);
        let mut pts = random_points(50, 5);
        pts.push(p);
        pts.push(p);
        pts.push(p);
        let tree = KdTree::new(&pts);
        let n = tree.nearest(&p).unwrap();
        assert_eq!(n.index, 50);
        let other = tree.nearest_other(&p, 50).unwrap();
        assert_eq!(other.index, 51);
        assert_eq!(other.dist2, 0.0);
    }

    #[test]
    fn empty_tree() {
        let pts: Vec<Vec3> = Vec::new();
        let tree = KdTree::new(&pts);
        assert!(tree.nearest(&Vec3::zeros()).is_none());
        assert!(tree.knn(&Vec3::zeros(), 3).is_empty());
    }
}
