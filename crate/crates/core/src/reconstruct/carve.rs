//! Visibility votes along sightlines.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU32, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{traverse, OccupancyGrid, OrientedCloud, DEFAULT_TRUNCATION_VOXELS, NEAR_D};
use crate::augment::{characteristic_distance, sightline_vectors};
use crate::error::{Result, VizError};
use crate::geom::Aabb;
use crate::scanner::ScannedPointCloud;

pub(super) fn check_cloud(pc: &ScannedPointCloud) -> Result<()> {
    if pc.is_empty() {
        return Err(VizError::EmptyCloud);
    }
    pc.validate()
}

/// Unfinalized carving grid over the cloud. `truncation = None` means three
/// voxels.
pub fn carve_votes(pc: &ScannedPointCloud, resolution: usize, truncation: Option<f64>) -> Result<OccupancyGrid> {
    check_cloud(pc)?;
    let mut grid = OccupancyGrid::covering(&Aabb::from_points(&pc.points), resolution)?;
    let tau = truncation.unwrap_or(DEFAULT_TRUNCATION_VOXELS * grid.voxel_size);
    grid.add_carve_votes(pc, tau)?;
    Ok(grid)
}

impl OccupancyGrid {
    /// Voxels along each sightline up to `tau` before the point get an empty
    /// vote; voxels within `tau` behind it get a full vote.
    pub fn add_carve_votes(&mut self, pc: &ScannedPointCloud, tau: f64) -> Result<()> {
        check_cloud(pc)?;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(VizError::invalid("truncation must be positive"));
        }
        let v = sightline_vectors(pc)?;
        let empty: Vec<AtomicU32> = self.empty_votes.iter().map(|&c| AtomicU32::new(c)).collect();
        let full: Vec<AtomicU32> = self.full_votes.iter().map(|&c| AtomicU32::new(c)).collect();
        let (n, origin, h) = (self.resolution, self.origin, self.voxel_size);
        let index = |i: usize, j: usize, k: usize| i + n * (j + n * k);
        (0..pc.len()).into_par_iter().for_each(|p| {
            let (x, s) = (pc.points[p], pc.sensors[p]);
            let front = x + tau * v[p];
            let back = x - tau * v[p];
            // A sensor within τ of its point leaves nothing to carve.
            if (s - x).norm() > tau {
                traverse(n, &origin, h, &s, &front, |i, j, k| {
                    empty[index(i, j, k)].fetch_add(1, Ordering::Relaxed);
                });
            }
            traverse(n, &origin, h, &x, &back, |i, j, k| {
                full[index(i, j, k)].fetch_add(1, Ordering::Relaxed);
            });
        });
        self.empty_votes = empty.into_iter().map(AtomicU32::into_inner).collect();
        self.full_votes = full.into_iter().map(AtomicU32::into_inner).collect();
        Ok(())
    }
}

/// How voxels without a vote majority are decided.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fill {
    /// Boundary flood fill through voxels without full votes; the rest full.
    Flood,
    /// Sensor-oriented tangent planes near the cloud, winding number beyond.
    #[default]
    Oriented,
}

impl Fill {
    pub fn name(self) -> &'static str {
        match self {
            Fill::Flood => "flood",
            Fill::Oriented => "oriented",
        }
    }
}

impl fmt::Display for Fill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fill {
    type Err = VizError;

    fn from_str(s: &str) -> Result<Fill> {
        match s.trim().to_ascii_lowercase().as_str() {
            "flood" => Ok(Fill::Flood),
            "oriented" => Ok(Fill::Oriented),
            _ => Err(VizError::invalid(format!("unknown fill {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CarveParams {
    /// Vote truncation τ; three voxels when absent.
    pub truncation: Option<f64>,
    pub fill: Fill,
}

/// Visibility-carving occupancy, finalized.
pub fn carve_occupancy(pc: &ScannedPointCloud, resolution: usize, params: &CarveParams) -> Result<OccupancyGrid> {
    let mut grid = carve_votes(pc, resolution, params.truncation)?;
    match params.fill {
        Fill::Flood => grid.finalize(),
        Fill::Oriented => {
            let tau = params.truncation.unwrap_or(DEFAULT_TRUNCATION_VOXELS * grid.voxel_size);
            let near = (NEAR_D * characteristic_distance(&pc.points)?).max(1.5 * tau);
            grid.finalize_oriented(&OrientedCloud::from_scan(pc)?, near)?;
        }
    }
    Ok(grid)
}
