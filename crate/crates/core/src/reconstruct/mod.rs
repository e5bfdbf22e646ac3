//! Occupancy reconstruction from sensor-aware clouds on a regular grid:
//! visibility carving, a density baseline that ignores visibility, and
//! marching-cubes extraction.

mod carve;
mod dda;
mod mc;
mod oriented;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augment::characteristic_distance;
use crate::error::{Result, VizError};
use crate::geom::{Aabb, Vec3};
use crate::kdtree::KdTree;
use crate::mesh::TriangleMesh;
use crate::scanner::ScannedPointCloud;

pub use carve::{carve_occupancy, carve_votes, CarveParams, Fill};
pub use dda::traverse;
pub use oriented::OrientedCloud;

pub const DEFAULT_RESOLUTION: usize = 128;
pub const MIN_RESOLUTION: usize = 8;
/// Grid padding on each side, as a fraction of the cloud's longest extent.
pub const PADDING: f64 = 0.05;
/// Default truncation in voxels.
pub const DEFAULT_TRUNCATION_VOXELS: f64 = 3.0;
/// Tied voxels closer than this many characteristic distances to a point are
/// decided by its tangent plane rather than the winding number.
pub const NEAR_D: f64 = 3.5;
/// Far from the cloud a tied voxel is full when its winding number exceeds
/// this fraction of its coverage, which tolerates unscanned surface.
pub const WINDING_FRACTION: f64 = 0.7;
/// Default density bandwidth in characteristic distances.
pub const DEFAULT_BANDWIDTH_D: f64 = 2.0;

/// Cubic voxel grid with vote counters and a per-voxel field in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    pub resolution: usize,
    /// Corner of voxel `(0, 0, 0)`.
    pub origin: Vec3,
    pub voxel_size: f64,
    pub empty_votes: Vec<u32>,
    pub full_votes: Vec<u32>,
    pub field: Vec<f64>,
}

impl OccupancyGrid {
    /// Grid of `resolution³` cubic voxels covering `bounds` padded by 5 % of
    /// its longest extent, centred on it.
    pub fn covering(bounds: &Aabb, resolution: usize) -> Result<OccupancyGrid> {
        if bounds.is_empty() {
            return Err(VizError::EmptyCloud);
        }
        let mut side = bounds.longest_extent() * (1.0 + 2.0 * PADDING);
        if !(side > 0.0) {
            side = 1e-3;
        }
        OccupancyGrid::cube(bounds.center() - Vec3::repeat(side / 2.0), side, resolution)
    }

    /// Grid of `resolution³` voxels filling the cube `[origin, origin + side]`.
    pub fn cube(origin: Vec3, side: f64, resolution: usize) -> Result<OccupancyGrid> {
        if resolution < MIN_RESOLUTION {
            return Err(VizError::invalid(format!(
                "resolution must be at least {MIN_RESOLUTION}, got {resolution}"
            )));
        }
        if !(side > 0.0) || !side.is_finite() {
            return Err(VizError::invalid("grid side must be positive"));
        }
        let cells = resolution.pow(3);
        Ok(OccupancyGrid {
            resolution,
            origin,
            voxel_size: side / resolution as f64,
            empty_votes: vec![0; cells],
            full_votes: vec![0; cells],
            field: vec![0.0; cells],
        })
    }

    /// Grid over an explicit cube whose field is `f` at voxel centres.
    pub fn from_fn(origin: Vec3, side: f64, resolution: usize, f: impl Fn(&Vec3) -> f64 + Sync) -> Result<OccupancyGrid> {
        let mut grid = OccupancyGrid::cube(origin, side, resolution)?;
        grid.field = (0..grid.len()).into_par_iter().map(|i| f(&grid.center_of(i))).collect();
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.field.is_empty()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution * (j + self.resolution * k)
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let n = self.resolution;
        [index % n, (index / n) % n, index / (n * n)]
    }

    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel_size
    }

    pub fn center_of(&self, index: usize) -> Vec3 {
        let [i, j, k] = self.coords(index);
        self.center(i, j, k)
    }

    /// Voxel containing `p`, if inside the grid.
    pub fn voxel_at(&self, p: &Vec3) -> Option<usize> {
        let mut c = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.resolution as f64) {
                return None;
            }
            c[a] = f as usize;
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    pub fn field_at(&self, p: &Vec3) -> Option<f64> {
        self.voxel_at(p).map(|i| self.field[i])
    }

    pub fn bounds(&self) -> Aabb {
        Aabb {
            min: self.origin,
            max: self.origin + Vec3::repeat(self.voxel_size * self.resolution as f64),
        }
    }

    pub fn count_full(&self) -> usize {
        self.field.iter().filter(|&&f| f > 0.0).count()
    }

    pub fn count_empty(&self) -> usize {
        self.field.iter().filter(|&&f| f < 0.0).count()
    }

    fn majority(&mut self) {
        for i in 0..self.len() {
            let (e, f) = (self.empty_votes[i], self.full_votes[i]);
            self.field[i] = match f.cmp(&e) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Less => -1.0,
                std::cmp::Ordering::Equal => 0.0,
            };
        }
    }

    /// Turns votes into the field: majority decides each voxel; every voxel
    /// reachable from the grid boundary through voxels without full votes is
    /// then empty, and whatever remains undecided is full.
    pub fn finalize(&mut self) {
        self.majority();
        let n = self.resolution;
        let mut seen = vec![false; self.len()];
        let mut queue = VecDeque::new();
        for idx in 0..self.len() {
            let [i, j, k] = self.coords(idx);
            let boundary = [i, j, k].iter().any(|&c| c == 0 || c == n - 1);
            if boundary && self.full_votes[idx] == 0 {
                seen[idx] = true;
                queue.push_back(idx);
            }
        }
        while let Some(idx) = queue.pop_front() {
            self.field[idx] = -1.0;
            let c = self.coords(idx);
            for axis in 0..3 {
                for delta in [-1i64, 1] {
                    let v = c[axis] as i64 + delta;
                    if v < 0 || v >= n as i64 {
                        continue;
                    }
                    let mut d = c;
                    d[axis] = v as usize;
                    let nb = self.index(d[0], d[1], d[2]);
                    if !seen[nb] && self.full_votes[nb] == 0 {
                        seen[nb] = true;
                        queue.push_back(nb);
                    }
                }
            }
        }
        for f in &mut self.field {
            if *f == 0.0 {
                *f = 1.0;
            }
        }
    }

    /// Turns votes into the field using oriented points for the voxels the
    /// votes leave open. Majority decides each voxel first. A tied or
    /// unobserved voxel within `near` of a point is full when it lies behind
    /// that point's tangent plane; farther ones are full when the winding
    /// number of the oriented cloud exceeds [`WINDING_FRACTION`] of its
    /// coverage. The outermost voxel layer is
    /// always empty so the extracted surface is closed.
    pub fn finalize_oriented(&mut self, cloud: &OrientedCloud, near: f64) -> Result<()> {
        self.majority();
        let tree = KdTree::new(&cloud.points);
        let n = self.resolution;
        let winding = oriented::CoarseWinding::new(self, cloud);
        let field = &self.field;
        let resolved: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let c = self.coords(i);
                if c.iter().any(|&x| x == 0 || x == n - 1) {
                    return -1.0;
                }
                if field[i] != 0.0 {
                    return field[i];
                }
                let q = self.center(c[0], c[1], c[2]);
                let nb = tree.nearest(&q).expect("points exist");
                let inside = if nb.dist2.sqrt() <= near {
                    (q - cloud.points[nb.index]).dot(&cloud.normals[nb.index]) <= 0.0
                } else {
                    let (w, cov) = winding.at(c);
                    w > WINDING_FRACTION * cov
                };
                if inside {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        self.field = resolved;
        Ok(())
    }
}

/// Full wherever a point lies within `bandwidth` of the voxel centre.
/// `bandwidth = None` means twice the characteristic distance.
pub fn density_occupancy(pc: &ScannedPointCloud, resolution: usize, bandwidth: Option<f64>) -> Result<OccupancyGrid> {
    if pc.is_empty() {
        return Err(VizError::EmptyCloud);
    }
    let bw = match bandwidth {
        Some(b) => b,
        None => DEFAULT_BANDWIDTH_D * characteristic_distance(&pc.points)?,
    };
    if !(bw > 0.0) || !bw.is_finite() {
        return Err(VizError::invalid("bandwidth must be positive"));
    }
    let mut grid = OccupancyGrid::covering(&Aabb::from_points(&pc.points), resolution)?;
    let (n, h) = (grid.resolution, grid.voxel_size);
    let mut inside = vec![false; grid.len()];
    let range = |c: f64, o: f64| -> (usize, usize) {
        let lo = (((c - bw - o) / h - 0.5).ceil()).max(0.0) as usize;
        let hi = (((c + bw - o) / h - 0.5).floor()).min(n as f64 - 1.0);
        (lo, if hi < 0.0 { 0 } else { hi as usize + 1 })
    };
    for x in &pc.points {
        let (i0, i1) = range(x.x, grid.origin.x);
        let (j0, j1) = range(x.y, grid.origin.y);
        let (k0, k1) = range(x.z, grid.origin.z);
        for k in k0..k1 {
            for j in j0..j1 {
                for i in i0..i1 {
                    if (grid.center(i, j, k) - x).norm() < bw {
                        inside[grid.index(i, j, k)] = true;
                    }
                }
            }
        }
    }
    grid.field = inside.into_iter().map(|b| if b { 1.0 } else { -1.0 }).collect();
    Ok(grid)
}

/// Extracts the `iso` surface of the field, treating voxel centres as grid
/// nodes. Larger field values are inside.
pub fn marching_cubes(grid: &OccupancyGrid, iso: f64) -> Result<TriangleMesh> {
    let origin = grid.origin + Vec3::repeat(grid.voxel_size / 2.0);
    mc::extract(grid.resolution, &origin, grid.voxel_size, &grid.field, iso)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Carve,
    Density,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Carve, Method::Density];

    pub fn name(self) -> &'static str {
        match self {
            Method::Carve => "carve",
            Method::Density => "density",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = VizError;

    fn from_str(s: &str) -> Result<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "carve" => Ok(Method::Carve),
            "density" => Ok(Method::Density),
            _ => Err(VizError::invalid(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructReport {
    pub method: Method,
    pub resolution: usize,
    /// Truncation for carving, bandwidth for density.
    pub truncation_or_bandwidth: f64,
    pub voxels_full: usize,
    pub voxels_empty: usize,
    pub seconds: f64,
}

/// Occupancy estimation followed by extraction at iso 0. `param` is the
/// truncation (carve) or bandwidth (density); `None` picks the default.
pub fn reconstruct_pipeline(
    pc: &ScannedPointCloud,
    method: Method,
    resolution: usize,
    param: Option<f64>,
) -> Result<(TriangleMesh, ReconstructReport)> {
    reconstruct_with_fill(pc, method, resolution, param, Fill::default())
}

/// [`reconstruct_pipeline`] with an explicit fill rule for carving.
pub fn reconstruct_with_fill(
    pc: &ScannedPointCloud,
    method: Method,
    resolution: usize,
    param: Option<f64>,
    fill: Fill,
) -> Result<(TriangleMesh, ReconstructReport)> {
    let start = Instant::now();
    let (grid, used) = match method {
        Method::Carve => {
            let params = CarveParams { truncation: param, fill };
            let grid = carve_occupancy(pc, resolution, &params)?;
            let tau = param.unwrap_or(DEFAULT_TRUNCATION_VOXELS * grid.voxel_size);
            (grid, tau)
        }
        Method::Density => {
            let bw = match param {
                Some(b) => b,
                None => DEFAULT_BANDWIDTH_D * characteristic_distance(&pc.points)?,
            };
            (density_occupancy(pc, resolution, Some(bw))?, bw)
        }
    };
    let mesh = marching_cubes(&grid, 0.0)?;
    let report = ReconstructReport {
        method,
        resolution,
        truncation_or_bandwidth: used,
        voxels_full: grid.count_full(),
        voxels_empty: grid.count_empty(),
        seconds: start.elapsed().as_secs_f64(),
    };
    Ok((mesh, report))
}

#[cfg(test)]
mod tests;
