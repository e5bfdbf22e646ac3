//! Voxel traversal of a line segment (Amanatides & Woo).

use crate::geom::{Aabb, Vec3};

/// Visits, in order along the segment `a → b`, every voxel of a `res³` grid
/// with the given origin and voxel size that the segment passes through.
pub fn traverse(res: usize, origin: &Vec3, h: f64, a: &Vec3, b: &Vec3, mut visit: impl FnMut(usize, usize, usize)) {
    let dir = b - a;
    let bounds = Aabb {
        min: *origin,
        max: origin + Vec3::repeat(res as f64 * h),
    };
    let inv = dir.map(|c| 1.0 / c);
    let Some((t0, t1)) = bounds.ray_interval(a, &inv, 1.0) else {
        return;
    };
    let start = a + dir * t0;
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_next = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for k in 0..3 {
        let local = (start[k] - origin[k]) / h;
        cell[k] = (local.floor() as i64).clamp(0, res as i64 - 1);
        if dir[k] > 0.0 {
            step[k] = 1;
            t_delta[k] = h / dir[k];
            t_next[k] = (origin[k] + (cell[k] + 1) as f64 * h - a[k]) / dir[k];
        } else if dir[k] < 0.0 {
            step[k] = -1;
            t_delta[k] = -h / dir[k];
            t_next[k] = (origin[k] + cell[k] as f64 * h - a[k]) / dir[k];
        }
    }
    loop {
        visit(cell[0] as usize, cell[1] as usize, cell[2] as usize);
        let k = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
            0
        } else if t_next[1] <= t_next[2] {
            1
        } else {
            2
        };
        if t_next[k] > t1 {
            return;
        }
        cell[k] += step[k];
        if cell[k] < 0 || cell[k] >= res as i64 {
            return;
        }
        t_next[k] += t_delta[k];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    /// Exact slab test of the segment against one voxel, shrunk slightly so
    /// grazing contacts along faces and edges are not required.
    fn overlaps(origin: &Vec3, h: f64, c: [usize; 3], a: &Vec3, b: &Vec3, shrink: f64) -> bool {
        let lo = origin + Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64) * h;
        let vox = Aabb {
            min: lo + Vec3::repeat(shrink),
            max: lo + Vec3::repeat(h - shrink),
        };
        let d = b - a;
        vox.ray_interval(a, &d.map(|x| 1.0 / x), 1.0).is_some()
    }

    #[test]
    fn matches_brute_force_overlap() {
        let res = 12;
        let origin = Vec3::repeat(-1.0);
        let h = 2.0 / res as f64;
        let mut r = rng::stream(3, 7, 0);
        for _ in 0..300 {
            let a = Vec3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            let b = Vec3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
            let mut seen = Vec::new();
            traverse(res, &origin, h, &a, &b, |i, j, k| seen.push([i, j, k]));
            // Consecutive voxels are face neighbours.
            for w in seen.windows(2) {
                let dist: usize = (0..3).map(|k| w[0][k].abs_diff(w[1][k])).sum();
                assert_eq!(dist, 1);
            }
            for i in 0..res {
                for j in 0..res {
                    for k in 0..res {
                        let c = [i, j, k];
                        if overlaps(&origin, h, c, &a, &b, 1e-9) {
                            assert!(seen.contains(&c), "missed {c:?}");
                        }
                        if seen.contains(&c) {
                            assert!(overlaps(&origin, h, c, &a, &b, -1e-9), "extra {c:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn axis_segment_outside_grid_visits_nothing() {
        let mut n = 0;
        traverse(8, &Vec3::zeros(), 1.0, &Vec3::new(-1.0, -1.0, -1.0), &Vec3::new(-1.0, 9.0, -1.0), |_, _, _| n += 1);
        assert_eq!(n, 0);
        traverse(8, &Vec3::zeros(), 1.0, &Vec3::new(0.5, 0.5, -3.0), &Vec3::new(0.5, 0.5, 20.0), |_, _, _| n += 1);
        assert_eq!(n, 8);
    }
}
