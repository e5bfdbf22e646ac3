//! Oriented point clouds and their generalized winding number.

use rayon::prelude::*;

use super::OccupancyGrid;
use crate::error::{Result, VizError};
use crate::geom::Vec3;
use crate::kdtree::KdTree;
use crate::normals;
use crate::scanner::ScannedPointCloud;

/// Points with outward unit normals and the surface area each represents.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedCloud {
    pub points: Vec<Vec3>,
    pub normals: Vec<Vec3>,
    pub areas: Vec<f64>,
}

impl OrientedCloud {
    /// Plane-fit normals flipped toward each point's sensor; each point's area
    /// is that of a disc holding one of its `k` nearest neighbours.
    pub fn from_scan(pc: &ScannedPointCloud) -> Result<OrientedCloud> {
        let k = normals::DEFAULT_K;
        if pc.len() <= k {
            return Err(VizError::invalid(format!("oriented fill needs more than {k} points")));
        }
        let est = normals::estimate_normals(&pc.points, k)?;
        let oriented = normals::orient_sensor(pc, &est.normals)?.normals;
        let tree = KdTree::new(&pc.points);
        let areas = pc
            .points
            .par_iter()
            .map(|p| {
                let r2 = tree.knn(p, k + 1).last().expect("enough points").dist2;
                std::f64::consts::PI * r2 / k as f64
            })
            .collect();
        Ok(OrientedCloud {
            points: pc.points.clone(),
            normals: oriented,
            areas,
        })
    }

    /// Generalized winding number at `q`: about 1 inside the sampled surface
    /// and 0 outside, degrading gracefully across holes.
    pub fn winding_number(&self, q: &Vec3) -> f64 {
        self.winding_and_coverage(q).0
    }

    /// Winding number together with its unsigned counterpart (the same sum
    /// with `|(p - q)·n|`), which measures how much of the view from `q` is
    /// covered by samples at all.
    pub fn winding_and_coverage(&self, q: &Vec3) -> (f64, f64) {
        let (mut w, mut c) = (0.0, 0.0);
        for ((p, n), a) in self.points.iter().zip(&self.normals).zip(&self.areas) {
            let d = p - q;
            let r = d.norm().max(0.5 * a.sqrt());
            let s = a * d.dot(n) / (r * r * r);
            w += s;
            c += s.abs();
        }
        let k = 4.0 * std::f64::consts::PI;
        (w / k, c / k)
    }
}

/// Winding number and coverage on every `STEP`-th voxel centre, trilinearly
/// interpolated.
pub(super) struct CoarseWinding {
    m: usize,
    values: Vec<(f64, f64)>,
}

impl CoarseWinding {
    const STEP: usize = 4;

    pub(super) fn new(grid: &OccupancyGrid, cloud: &OrientedCloud) -> CoarseWinding {
        let m = (grid.resolution - 1) / Self::STEP + 2;
        let values = (0..m * m * m)
            .into_par_iter()
            .map(|i| {
                let c = [i % m, (i / m) % m, i / (m * m)];
                let q = grid.origin
                    + Vec3::new(
                        (c[0] * Self::STEP) as f64 + 0.5,
                        (c[1] * Self::STEP) as f64 + 0.5,
                        (c[2] * Self::STEP) as f64 + 0.5,
                    ) * grid.voxel_size;
                cloud.winding_and_coverage(&q)
            })
            .collect();
        CoarseWinding { m, values }
    }

    /// Interpolated `(winding, coverage)` at voxel `c`.
    pub(super) fn at(&self, c: [usize; 3]) -> (f64, f64) {
        let m = self.m;
        let (mut w, mut cov) = (0.0, 0.0);
        for corner in 0..8 {
            let mut weight = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1;
                let frac = (c[a] % Self::STEP) as f64 / Self::STEP as f64;
                idx[a] = (c[a] / Self::STEP + hi).min(m - 1);
                weight *= if hi == 1 { frac } else { 1.0 - frac };
            }
            if weight > 0.0 {
                let v = self.values[idx[0] + m * (idx[1] + m * idx[2])];
                w += weight * v.0;
                cov += weight * v.1;
            }
        }
        (w, cov)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::icosphere;

    #[test]
    fn winding_number_of_a_sampled_sphere() {
        let s = icosphere(0.5, 4);
        let samples = s.sample_surface(4000, 3).unwrap();
        let cloud = OrientedCloud {
            points: samples.iter().map(|x| x.point).collect(),
            normals: samples.iter().map(|x| x.normal).collect(),
            areas: vec![s.total_area() / 4000.0; 4000],
        };
        assert!((cloud.winding_number(&Vec3::zeros()) - 1.0).abs() < 0.02);
        assert!((cloud.winding_number(&Vec3::new(0.2, -0.1, 0.1)) - 1.0).abs() < 0.05);
        assert!(cloud.winding_number(&Vec3::new(0.9, 0.3, 0.0)).abs() < 0.05);
        // a closed surface seen from outside covers the view twice
        let (w, c) = cloud.winding_and_coverage(&Vec3::new(0.9, 0.3, 0.0));
        assert!(w.abs() < 0.05 && c > 0.1);
        let (w, c) = cloud.winding_and_coverage(&Vec3::zeros());
        assert!((w - c).abs() < 0.02);
    }
}
