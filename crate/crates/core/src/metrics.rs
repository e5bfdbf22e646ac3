//! Surface evaluation: Monte-Carlo volumetric IoU, symmetric Chamfer distance
//! (reported ×100) and signed normal consistency.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VizError};
use crate::geom::Vec3;
use crate::kdtree::KdTree;
use crate::mesh::{SurfaceSample, TriangleMesh};
use crate::rng::{self, domain};

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Redraws allowed for one volume sample whose inside test is unresolvable.
const MAX_REDRAWS: usize = 64;

/// Fraction of the union volume shared by both meshes, estimated from `n`
/// uniform samples in the box enclosing both. Samples whose inside test cannot
/// be resolved are redrawn.
pub fn volumetric_iou(gt: &TriangleMesh, pred: &TriangleMesh, n: usize, seed: u64) -> Result<f64> {
    if n == 0 {
        return Err(VizError::invalid("sample count must be positive"));
    }
    if gt.is_empty() || pred.is_empty() {
        return Err(VizError::EmptyMesh);
    }
    if !gt.is_watertight() || !pred.is_watertight() {
        return Err(VizError::NotWatertight);
    }
    let bounds = gt.aabb().union(&pred.aabb());
    let extent = bounds.extent();
    let flags: Vec<(bool, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, domain::VOLUME, i as u64);
            for _ in 0..MAX_REDRAWS {
                let p = bounds.min + Vec3::new(r.random::<f64>(), r.random::<f64>(), r.random::<f64>()).component_mul(&extent);
                match (gt.is_inside(&p), pred.is_inside(&p)) {
                    (Ok(a), Ok(b)) => return Ok((a, b)),
                    (Err(VizError::UnresolvableQuery(..)), _) | (_, Err(VizError::UnresolvableQuery(..))) => continue,
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
            }
            Err(VizError::invalid("volume sample could not be resolved"))
        })
        .collect::<Result<_>>()?;
    let both = flags.iter().filter(|(a, b)| *a && *b).count();
    let either = flags.iter().filter(|(a, b)| *a || *b).count();
    if either == 0 {
        log::warn!("no volume sample fell inside either mesh");
        return Ok(0.0);
    }
    Ok(both as f64 / either as f64)
}

fn mean_nn(from: &[Vec3], to: &KdTree) -> (Vec<usize>, f64) {
    let hits: Vec<(usize, f64)> = from
        .par_iter()
        .map(|p| {
            let nb = to.nearest(p).expect("target samples exist");
            (nb.index, nb.dist2.sqrt())
        })
        .collect();
    let mean = hits.iter().map(|h| h.1).sum::<f64>() / from.len() as f64;
    (hits.into_iter().map(|h| h.0).collect(), mean)
}

/// Chamfer distance ×100 between two sample sets.
pub fn chamfer_from_samples(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(VizError::invalid("chamfer needs non-empty sample sets"));
    }
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    let (_, ab) = mean_nn(a, &tb);
    let (_, ba) = mean_nn(b, &ta);
    Ok(100.0 * (0.5 * ab + 0.5 * ba))
}

/// Symmetric mean of signed normal dot products at nearest-sample pairs.
pub fn normal_consistency_from_samples(a: &[Vec3], na: &[Vec3], b: &[Vec3], nb: &[Vec3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() || a.len() != na.len() || b.len() != nb.len() {
        return Err(VizError::invalid("normal consistency needs matching non-empty samples"));
    }
    let (ta, tb) = (KdTree::new(a), KdTree::new(b));
    let side = |from: &[Vec3], nf: &[Vec3], to: &KdTree, nt: &[Vec3]| -> f64 {
        let (idx, _) = mean_nn(from, to);
        let dots: Vec<f64> = idx.iter().zip(nf).map(|(&j, n)| n.dot(&nt[j])).collect();
        dots.iter().sum::<f64>() / dots.len() as f64
    };
    Ok(0.5 * side(a, na, &tb, nb) + 0.5 * side(b, nb, &ta, na))
}

/// Surface samples of both meshes. The two meshes draw from different random
/// streams so comparing a mesh with itself does not reuse its samples.
fn surface_pair(gt: &TriangleMesh, pred: &TriangleMesh, n: usize, seed: u64) -> Result<(Vec<SurfaceSample>, Vec<SurfaceSample>)> {
    if n == 0 {
        return Err(VizError::invalid("sample count must be positive"));
    }
    Ok((
        gt.sample_surface_in(n, seed, domain::SURFACE_GT)?,
        pred.sample_surface_in(n, seed, domain::SURFACE_PRED)?,
    ))
}

fn split(s: &[SurfaceSample]) -> (Vec<Vec3>, Vec<Vec3>) {
    s.iter().map(|x| (x.point, x.normal)).unzip()
}

pub fn chamfer(gt: &TriangleMesh, pred: &TriangleMesh, n: usize, seed: u64) -> Result<f64> {
    let (a, b) = surface_pair(gt, pred, n, seed)?;
    chamfer_from_samples(&split(&a).0, &split(&b).0)
}

pub fn normal_consistency(gt: &TriangleMesh, pred: &TriangleMesh, n: usize, seed: u64) -> Result<f64> {
    let (a, b) = surface_pair(gt, pred, n, seed)?;
    let ((pa, na), (pb, nb)) = (split(&a), split(&b));
    normal_consistency_from_samples(&pa, &na, &pb, &nb)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub n_volume_samples: usize,
    pub n_surface_samples: usize,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            n_volume_samples: DEFAULT_SAMPLES,
            n_surface_samples: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub iou: Option<f64>,
    pub chamfer_x100: f64,
    pub normal_consistency: f64,
    pub n_volume_samples: usize,
    pub n_surface_samples: usize,
    pub seed: u64,
    pub gt_watertight: bool,
    pub pred_watertight: bool,
}

/// All three metrics with one seed; IoU is omitted unless both meshes are
/// watertight.
pub fn evaluate(gt: &TriangleMesh, pred: &TriangleMesh, config: &EvalConfig) -> Result<MetricsReport> {
    let gt_watertight = gt.is_watertight();
    let pred_watertight = pred.is_watertight();
    let iou = if gt_watertight && pred_watertight {
        Some(volumetric_iou(gt, pred, config.n_volume_samples, config.seed)?)
    } else {
        log::warn!("IoU omitted: gt watertight {gt_watertight}, pred watertight {pred_watertight}");
        None
    };
    let (a, b) = surface_pair(gt, pred, config.n_surface_samples, config.seed)?;
    let ((pa, na), (pb, nb)) = (split(&a), split(&b));
    Ok(MetricsReport {
        iou,
        chamfer_x100: chamfer_from_samples(&pa, &pb)?,
        normal_consistency: normal_consistency_from_samples(&pa, &na, &pb, &nb)?,
        n_volume_samples: config.n_volume_samples,
        n_surface_samples: config.n_surface_samples,
        seed: config.seed,
        gt_watertight,
        pred_watertight,
    })
}
