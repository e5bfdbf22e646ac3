use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{write_json, Recorder};
use super::{usage, AugmentArgs, CliError, EvalArgs, PipelineArgs, ReconstructArgs, ScanArgs, ShapesArgs};
use crate::augment::{self, AugmentConfig, AugmentSidecar, AugmentedPointCloud, Mode};
use crate::error::VizError;
use crate::geom::Vec3;
use crate::mesh::io::{load_mesh, save_mesh};
use crate::mesh::primitives::reference_shapes;
use crate::mesh::{normalize_unit_cube, TriangleMesh};
use crate::metrics::{evaluate, EvalConfig, MetricsReport};
use crate::normals;
use crate::reconstruct::{reconstruct_with_fill, Fill, Method};
use crate::scanner::{self, ScanConfig, ScannedPointCloud};

type CmdResult = Result<(), CliError>;

/// Where `--mode normals` takes its normals from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalSource {
    /// Stored ground-truth normals of the scan.
    Gt,
    /// Plane-fit normals oriented by a minimum spanning tree.
    Mst,
    /// Plane-fit normals flipped toward their sensors.
    Sensor,
}

impl FromStr for NormalSource {
    type Err = VizError;

    fn from_str(s: &str) -> Result<NormalSource, VizError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gt" => Ok(NormalSource::Gt),
            "mst" => Ok(NormalSource::Mst),
            "sensor" => Ok(NormalSource::Sensor),
            _ => Err(VizError::invalid(format!("unknown normal source {s:?}"))),
        }
    }
}

/// One line of the pipeline's summary CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mesh: String,
    pub method: Method,
    pub iou: Option<f64>,
    pub chamfer_x100: Option<f64>,
    pub normal_consistency: Option<f64>,
    pub pred_watertight: bool,
    pub error: String,
}

fn draw_seed() -> u64 {
    let seed = u64::from(rand::random::<u32>());
    log::info!("no seed given; drew {seed}");
    seed
}

/// `<path>` with its extension replaced by `ext`.
fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

fn params<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("arguments serialize")
}

fn load_gt_mesh(path: &Path, normalize: bool) -> Result<TriangleMesh, VizError> {
    let mesh = load_mesh(path)?.mesh;
    if normalize {
        Ok(normalize_unit_cube(&mesh)?.0)
    } else {
        Ok(mesh)
    }
}

fn scan_mesh(mesh: &TriangleMesh, cfg: &ScanConfig, normalize: bool) -> Result<(ScannedPointCloud, Vec<Vec3>), VizError> {
    let (mesh, frame) = if normalize {
        let (m, f) = normalize_unit_cube(mesh)?;
        (m, Some(f))
    } else {
        (mesh.clone(), None)
    };
    let sensors = scanner::place_sensors(&mesh, cfg)?;
    let mut pc = scanner::scan_with_sensors(&mesh, &sensors, cfg)?;
    if let Some(f) = frame {
        pc.frame = f;
    }
    Ok((pc, sensors))
}

pub(super) fn scan(mut a: ScanArgs) -> CmdResult {
    let seed = *a.seed.get_or_insert_with(draw_seed);
    let cfg = ScanConfig {
        n_points: a.n_points,
        n_sensors: a.n_scanners,
        noise_sigma: a.noise,
        sphere_radius_factors: (a.radius_factors.0, a.radius_factors.1),
        hemisphere_mode: a.hemisphere,
        seed,
    };
    cfg.validate().map_err(usage)?;
    let mut rec = Recorder::start("scan");
    rec.input(&a.mesh)?;
    let mesh = load_mesh(&a.mesh)?.mesh;
    let (mut pc, sensors) = scan_mesh(&mesh, &cfg, a.normalize)?;
    if let Some(v) = a.decimate {
        pc = scanner::decimate_voxel(&pc, v)?;
    }
    scanner::save_cloud(&pc, None, &a.out)?;
    rec.output(&a.out);
    let details = json!({
        "points": pc.len(),
        "sensors": sensors.iter().map(|s| [s.x, s.y, s.z]).collect::<Vec<_>>(),
        "frame": { "scale": pc.frame.scale, "translation": [pc.frame.translation[0], pc.frame.translation[1], pc.frame.translation[2]] },
    });
    rec.finish(&a.out, Some(seed), params(&a), details)?;
    Ok(())
}

fn augment_cloud(pc: &ScannedPointCloud, cfg: &AugmentConfig, source: NormalSource) -> Result<AugmentedPointCloud, VizError> {
    if cfg.mode != Mode::Normals || source == NormalSource::Gt {
        return augment::augment(pc, cfg);
    }
    let est = normals::estimate_normals(&pc.points, normals::DEFAULT_K)?;
    let oriented = match source {
        NormalSource::Mst => normals::orient_mst(&pc.points, &est.normals, normals::DEFAULT_K)?,
        _ => normals::orient_sensor(pc, &est.normals)?,
    };
    augment::normals_channels(pc, &oriented.normals)
}

pub(super) fn augment(a: AugmentArgs) -> CmdResult {
    let cfg = AugmentConfig {
        mode: a.mode,
        ap_distance_multiplier: a.ap_dist_mult,
        ap_placement: a.ap_placement,
        grazing_radius: a.grazing_radius,
        local_knn: a.ap_local_knn,
    };
    cfg.validate().map_err(usage)?;
    let mut rec = Recorder::start("augment");
    rec.input(&a.input)?;
    let pc = scanner::load_cloud(&a.input)?;
    let aug = augment_cloud(&pc, &cfg, a.normals)?;
    augment::save_augmented(&aug, &a.out)?;
    rec.output(&a.out);
    let sidecar = sidecar_for(&aug, &cfg, &pc, Some(&a.input));
    let sidecar_path = sibling(&a.out, "json");
    write_json(&sidecar_path, &sidecar)?;
    rec.output(&sidecar_path);
    rec.finish(&a.out, pc.seed, params(&a), json!({ "rows": aug.len(), "width": aug.width }))?;
    Ok(())
}

fn sidecar_for(aug: &AugmentedPointCloud, cfg: &AugmentConfig, pc: &ScannedPointCloud, source: Option<&Path>) -> AugmentSidecar {
    AugmentSidecar {
        mode: aug.mode,
        d: aug.characteristic_distance,
        multiplier: cfg.ap_distance_multiplier,
        placement: cfg.ap_placement,
        local_knn: cfg.local_knn,
        rows: aug.len(),
        width: aug.width,
        seed: pc.seed,
        source: source.map(|p| p.display().to_string()),
    }
}

pub(super) fn reconstruct(a: ReconstructArgs) -> CmdResult {
    let mut rec = Recorder::start("reconstruct");
    rec.input(&a.input)?;
    let pc = scanner::load_cloud(&a.input)?;
    let param = match a.method {
        Method::Carve => a.truncation.0,
        Method::Density => a.bandwidth.0,
    };
    let (mesh, report) = reconstruct_with_fill(&pc, a.method, a.res, param, a.fill)?;
    if mesh.is_empty() {
        log::warn!("reconstruction is empty");
    }
    save_mesh(&mesh, &a.out)?;
    rec.output(&a.out);
    let report_path = sibling(&a.out, "json");
    write_json(&report_path, &report)?;
    rec.output(&report_path);
    rec.finish(&a.out, pc.seed, params(&a), json!({ "triangles": mesh.triangle_count(), "watertight": mesh.is_watertight() }))?;
    Ok(())
}

pub(super) fn eval(a: EvalArgs) -> CmdResult {
    let mut rec = Recorder::start("eval");
    rec.input(&a.gt)?;
    rec.input(&a.pred)?;
    let gt = load_mesh(&a.gt)?.mesh;
    let pred = load_mesh(&a.pred)?.mesh;
    let cfg = EvalConfig {
        n_volume_samples: a.samples,
        n_surface_samples: a.samples,
        seed: a.seed,
    };
    let report = evaluate(&gt, &pred, &cfg)?;
    write_json(&a.out, &report)?;
    rec.output(&a.out);
    rec.finish(&a.out, Some(a.seed), params(&a), serde_json::Value::Null)?;
    Ok(())
}

fn mesh_files(dir: &Path) -> Result<Vec<PathBuf>, VizError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| VizError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("ply") || e.eq_ignore_ascii_case("obj"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(VizError::invalid(format!("no .ply or .obj meshes in {}", dir.display())));
    }
    Ok(files)
}

/// Runs every stage for one mesh, writing intermediates under `dir`.
fn pipeline_one(path: &Path, dir: &Path, a: &PipelineArgs, seed: u64) -> Result<Vec<SummaryRow>, VizError> {
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    fs::create_dir_all(dir).map_err(|e| VizError::io(dir, e))?;
    let gt = load_gt_mesh(path, a.normalize)?;
    let cfg = ScanConfig {
        n_points: a.n_points,
        n_sensors: a.n_scanners,
        noise_sigma: a.noise,
        seed,
        ..ScanConfig::default()
    };
    // `gt` is already normalized when requested, so scan it as is
    let (pc, _) = scan_mesh(&gt, &cfg, false)?;
    scanner::save_cloud(&pc, None, &dir.join("scan.ply"))?;

    let acfg = AugmentConfig::with_mode(a.mode);
    let aug = augment::augment(&pc, &acfg)?;
    let aug_path = dir.join("augmented.ply");
    augment::save_augmented(&aug, &aug_path)?;
    // the source is named relative to the sidecar so runs in different
    // directories produce identical files
    write_json(&sibling(&aug_path, "json"), &sidecar_for(&aug, &acfg, &pc, Some(Path::new("scan.ply"))))?;

    let eval_cfg = EvalConfig {
        n_volume_samples: a.samples,
        n_surface_samples: a.samples,
        seed,
    };
    let mut rows = Vec::new();
    for method in Method::ALL {
        let mesh_path = dir.join(format!("{method}.ply"));
        let (pred, report) = reconstruct_with_fill(&pc, method, a.res, None, Fill::default())?;
        save_mesh(&pred, &mesh_path)?;
        write_json(&sibling(&mesh_path, "json"), &report)?;
        let row = match evaluate(&gt, &pred, &eval_cfg) {
            Ok(m) => {
                write_json(&dir.join(format!("{method}.eval.json")), &m)?;
                summary_row(&name, method, Some(&m), String::new())
            }
            Err(e) => {
                log::warn!("{name} {method}: {e}");
                summary_row(&name, method, None, e.to_string())
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

fn summary_row(mesh: &str, method: Method, m: Option<&MetricsReport>, error: String) -> SummaryRow {
    SummaryRow {
        mesh: mesh.to_string(),
        method,
        iou: m.and_then(|m| m.iou),
        chamfer_x100: m.map(|m| m.chamfer_x100),
        normal_consistency: m.map(|m| m.normal_consistency),
        pred_watertight: m.is_some_and(|m| m.pred_watertight),
        error,
    }
}

pub(super) fn pipeline(mut a: PipelineArgs) -> CmdResult {
    let seed = *a.seed.get_or_insert_with(draw_seed);
    let mut rec = Recorder::start("pipeline");
    let files = mesh_files(&a.meshes)?;
    for f in &files {
        rec.input(f)?;
    }
    fs::create_dir_all(&a.out).map_err(|e| VizError::io(&a.out, e))?;
    let work = |f: &PathBuf| {
        let stem = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        pipeline_one(f, &a.out.join(stem), &a, seed)
    };
    let results: Vec<Result<Vec<SummaryRow>, VizError>> = if a.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(a.jobs)
            .build()
            .map_err(|e| VizError::invalid(e.to_string()))?;
        pool.install(|| files.par_iter().map(work).collect())
    } else {
        files.iter().map(work).collect()
    };
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let summary = a.out.join("summary.csv");
    write_summary(&summary, &rows)?;
    rec.output(&summary);
    let meshes: Vec<String> = files.iter().map(|f| f.display().to_string()).collect();
    rec.finish(&summary, Some(seed), params(&a), json!({ "meshes": meshes, "rows": rows.len() }))?;
    Ok(())
}

fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), VizError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| VizError::Parse(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r).map_err(|e| VizError::Parse(e.to_string()))?;
    }
    w.flush().map_err(|e| VizError::io(path, e))
}

pub(super) fn shapes(a: ShapesArgs) -> CmdResult {
    let mut rec = Recorder::start("shapes");
    fs::create_dir_all(&a.out).map_err(|e| VizError::io(&a.out, e))?;
    for (name, mesh) in reference_shapes() {
        let path = a.out.join(format!("{name}.ply"));
        save_mesh(&mesh, &path)?;
        rec.output(&path);
    }
    let primary = a.out.join("shapes");
    rec.finish(&primary, None, params(&a), serde_json::Value::Null)?;
    Ok(())
}
