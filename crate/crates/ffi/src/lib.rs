//! C ABI over the viziscan toolkit.
//!
//! Objects cross the boundary as opaque handles (`VizMesh`, `VizCloud`,
//! `VizAugmented`) created by `viz_*` constructors and released with the
//! matching `*_free`. Every fallible call returns a [`VizStatus`]; on failure
//! a message is available from [`viz_last_error`] on the same thread.
//! Panics never cross the boundary: they are reported as
//! `VIZ_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use viziscan::augment::{self, AugmentConfig, AugmentedPointCloud, Mode, Placement};
use viziscan::mesh::primitives::{cuboid, icosphere, open_cup};
use viziscan::mesh::{load_mesh, save_mesh};
use viziscan::metrics::{evaluate, EvalConfig};
use viziscan::reconstruct::{reconstruct_pipeline, Method};
use viziscan::scanner::{self, ScanConfig};
use viziscan::{ScannedPointCloud, TriangleMesh, Vec3, VizError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VizStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    EmptyInput = 5,
    NotWatertight = 6,
    Unreachable = 7,
    Geometry = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

impl From<&VizError> for VizStatus {
    fn from(e: &VizError) -> Self {
        match e {
            VizError::Io { .. } => VizStatus::Io,
            VizError::Parse(_) => VizStatus::Parse,
            VizError::NoGeometry | VizError::EmptyMesh | VizError::EmptyCloud => VizStatus::EmptyInput,
            VizError::NotWatertight => VizStatus::NotWatertight,
            VizError::Unreachable => VizStatus::Unreachable,
            VizError::IndexOutOfRange { .. }
            | VizError::ZeroExtent
            | VizError::UnresolvableQuery(..)
            | VizError::CoincidentSensor { .. } => VizStatus::Geometry,
            VizError::ModeMismatch { .. } | VizError::InvalidArgument(_) => VizStatus::InvalidArgument,
        }
    }
}

/// Triangle mesh handle.
pub struct VizMesh(TriangleMesh);

/// Sensor-aware point cloud handle.
pub struct VizCloud(ScannedPointCloud);

/// Augmented point cloud handle.
pub struct VizAugmented(AugmentedPointCloud);

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VizShape {
    /// Icosphere of radius 0.5.
    Sphere = 0,
    /// Box 0.8 × 0.6 × 0.4.
    Box = 1,
    /// Open-top box 0.8 × 0.8 × 0.6 with walls 0.05 thick.
    Cup = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VizMode {
    Raw = 0,
    Sv = 1,
    Ap = 2,
    Svap = 3,
    SensorPos = 4,
    UnnormSv = 5,
    Normals = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VizPlacement {
    Symmetric = 0,
    Midpoint = 1,
    Grazing = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VizMethod {
    Carve = 0,
    Density = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VizScanConfig {
    pub n_points: usize,
    pub n_sensors: usize,
    pub noise_sigma: f64,
    pub radius_factor_inner: f64,
    pub radius_factor_outer: f64,
    pub hemisphere: bool,
    pub seed: u64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VizAugmentConfig {
    pub mode: VizMode,
    pub ap_distance_multiplier: f64,
    pub placement: VizPlacement,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VizMetrics {
    /// Valid only when `has_iou` is true (both meshes watertight).
    pub iou: f64,
    pub has_iou: bool,
    pub chamfer_x100: f64,
    pub normal_consistency: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: VizStatus, msg: impl Into<String>) -> VizStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, converting errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), VizStatus>) -> VizStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VizStatus::Ok,
        Ok(Err(s)) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(VizStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn viz(e: VizError) -> VizStatus {
    let status = VizStatus::from(&e);
    fail(status, e.to_string())
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, VizStatus> {
    if p.is_null() {
        return Err(fail(VizStatus::NullArgument, "path is null"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VizStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, VizStatus> {
    p.as_ref().ok_or_else(|| fail(VizStatus::NullArgument, format!("{what} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, VizStatus> {
    p.as_mut().ok_or_else(|| fail(VizStatus::NullArgument, format!("{what} is null")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], VizStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(VizStatus::NullArgument, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn triples(flat: &[f64]) -> Vec<Vec3> {
    flat.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

unsafe fn copy_out(src: &[f64], out: *mut f64, capacity: usize) -> Result<(), VizStatus> {
    if out.is_null() {
        return Err(fail(VizStatus::NullArgument, "output buffer is null"));
    }
    if capacity < src.len() {
        return Err(fail(
            VizStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn viz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next `viz_*` call on the same thread.
#[no_mangle]
pub extern "C" fn viz_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

// ---- meshes ----

/// Loads a PLY or OBJ mesh.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_load(path: *const c_char, out: *mut *mut VizMesh) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = path_arg(path)?;
        let mesh = load_mesh(&path).map_err(viz)?.mesh;
        *out = Box::into_raw(Box::new(VizMesh(mesh)));
        Ok(())
    })
}

/// Builds a mesh from `n_vertices` xyz triples and `n_triangles` index triples.
///
/// # Safety
/// `vertices` must hold `3 * n_vertices` doubles and `triangles`
/// `3 * n_triangles` indices; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_from_arrays(
    vertices: *const f64,
    n_vertices: usize,
    triangles: *const u32,
    n_triangles: usize,
    out: *mut *mut VizMesh,
) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let v = slice_arg(vertices, 3 * n_vertices, "vertices")?;
        let t = slice_arg(triangles, 3 * n_triangles, "triangles")?;
        let tris = t.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let mesh = TriangleMesh::new(triples(v), tris).map_err(viz)?;
        *out = Box::into_raw(Box::new(VizMesh(mesh)));
        Ok(())
    })
}

/// One of the procedural reference shapes, centred at the origin.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_shape(shape: VizShape, out: *mut *mut VizMesh) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mesh = match shape {
            VizShape::Sphere => icosphere(0.5, 4),
            VizShape::Box => cuboid(Vec3::new(0.8, 0.6, 0.4), Vec3::zeros()),
            VizShape::Cup => open_cup(Vec3::new(0.8, 0.8, 0.6), 0.05, Vec3::zeros()),
        };
        *out = Box::into_raw(Box::new(VizMesh(mesh)));
        Ok(())
    })
}

/// Writes a binary PLY.
///
/// # Safety
/// `mesh` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_save(mesh: *const VizMesh, path: *const c_char) -> VizStatus {
    guard(|| {
        let mesh = handle(mesh, "mesh")?;
        save_mesh(&mesh.0, &path_arg(path)?).map_err(viz)
    })
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_vertex_count(mesh: *const VizMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.vertices().len())
}

/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_triangle_count(mesh: *const VizMesh) -> usize {
    mesh.as_ref().map_or(0, |m| m.0.triangle_count())
}

/// True when every edge is shared by exactly two consistently wound triangles.
///
/// # Safety
/// `mesh` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_is_watertight(mesh: *const VizMesh) -> bool {
    mesh.as_ref().is_some_and(|m| m.0.is_watertight())
}

/// Copies `3 * vertex_count` doubles into `out`.
///
/// # Safety
/// `mesh` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_copy_vertices(mesh: *const VizMesh, out: *mut f64, capacity: usize) -> VizStatus {
    guard(|| {
        let mesh = handle(mesh, "mesh")?;
        copy_out(&flatten(mesh.0.vertices()), out, capacity)
    })
}

/// Copies `3 * triangle_count` indices into `out`.
///
/// # Safety
/// `mesh` must be a live handle; `out` must hold `capacity` indices.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_copy_triangles(mesh: *const VizMesh, out: *mut u32, capacity: usize) -> VizStatus {
    guard(|| {
        let mesh = handle(mesh, "mesh")?;
        let flat: Vec<u32> = mesh.0.triangles().iter().flatten().copied().collect();
        if out.is_null() {
            return Err(fail(VizStatus::NullArgument, "output buffer is null"));
        }
        if capacity < flat.len() {
            return Err(fail(VizStatus::BufferTooSmall, format!("{} indices needed", flat.len())));
        }
        ptr::copy_nonoverlapping(flat.as_ptr(), out, flat.len());
        Ok(())
    })
}

/// # Safety
/// `mesh` must come from a `viz_mesh_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn viz_mesh_free(mesh: *mut VizMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

// ---- scanning ----

/// 3 000 points, 10 sensors, noise 0.005, radius factors 1.5 and 2.5, seed 0.
#[no_mangle]
pub extern "C" fn viz_scan_config_default() -> VizScanConfig {
    let d = ScanConfig::default();
    VizScanConfig {
        n_points: d.n_points,
        n_sensors: d.n_sensors,
        noise_sigma: d.noise_sigma,
        radius_factor_inner: d.sphere_radius_factors.0,
        radius_factor_outer: d.sphere_radius_factors.1,
        hemisphere: d.hemisphere_mode,
        seed: d.seed,
    }
}

/// Virtually scans `mesh`.
///
/// # Safety
/// `mesh` and `config` must be valid pointers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_scan(mesh: *const VizMesh, config: *const VizScanConfig, out: *mut *mut VizCloud) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mesh = handle(mesh, "mesh")?;
        let c = handle(config, "config")?;
        let cfg = ScanConfig {
            n_points: c.n_points,
            n_sensors: c.n_sensors,
            noise_sigma: c.noise_sigma,
            sphere_radius_factors: (c.radius_factor_inner, c.radius_factor_outer),
            hemisphere_mode: c.hemisphere,
            seed: c.seed,
        };
        let pc = scanner::scan(&mesh.0, &cfg).map_err(viz)?;
        *out = Box::into_raw(Box::new(VizCloud(pc)));
        Ok(())
    })
}

/// Builds a cloud from `n` points and their sensors (xyz triples each).
///
/// # Safety
/// `points` and `sensors` must hold `3 * n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_cloud_from_arrays(
    points: *const f64,
    sensors: *const f64,
    n: usize,
    out: *mut *mut VizCloud,
) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let p = slice_arg(points, 3 * n, "points")?;
        let s = slice_arg(sensors, 3 * n, "sensors")?;
        let pc = ScannedPointCloud::new(triples(p), triples(s), None).map_err(viz)?;
        *out = Box::into_raw(Box::new(VizCloud(pc)));
        Ok(())
    })
}

/// Reads a sensor-cloud PLY.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_cloud_load(path: *const c_char, out: *mut *mut VizCloud) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let pc = scanner::load_cloud(&path_arg(path)?).map_err(viz)?;
        *out = Box::into_raw(Box::new(VizCloud(pc)));
        Ok(())
    })
}

/// Writes a sensor-cloud PLY (with ground-truth normals when present).
///
/// # Safety
/// `cloud` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn viz_cloud_save(cloud: *const VizCloud, path: *const c_char) -> VizStatus {
    guard(|| {
        let cloud = handle(cloud, "cloud")?;
        scanner::save_cloud(&cloud.0, None, &path_arg(path)?).map_err(viz)
    })
}

/// # Safety
/// `cloud` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn viz_cloud_len(cloud: *const VizCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Copies `3 * len` doubles of point positions.
///
/// # Safety
/// `cloud` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn viz_cloud_copy_points(cloud: *const VizCloud, out: *mut f64, capacity: usize) -> VizStatus {
    guard(|| copy_out(&flatten(&handle(cloud, "cloud")?.0.points), out, capacity))
}

/// Copies `3 * len` doubles of sensor positions.
///
/// # Safety
/// `cloud` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn viz_cloud_copy_sensors(cloud: *const VizCloud, out: *mut f64, capacity: usize) -> VizStatus {
    guard(|| copy_out(&flatten(&handle(cloud, "cloud")?.0.sensors), out, capacity))
}

/// Mean nearest-neighbour distance of the cloud's points.
///
/// # Safety
/// `cloud` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_characteristic_distance(cloud: *const VizCloud, out: *mut f64) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = augment::characteristic_distance(&handle(cloud, "cloud")?.0.points).map_err(viz)?;
        Ok(())
    })
}

/// # Safety
/// `cloud` must come from a `viz_cloud_*` or `viz_scan` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn viz_cloud_free(cloud: *mut VizCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

// ---- augmentation ----

/// SVAP, multiplier 1, symmetric placement.
#[no_mangle]
pub extern "C" fn viz_augment_config_default() -> VizAugmentConfig {
    VizAugmentConfig {
        mode: VizMode::Svap,
        ap_distance_multiplier: 1.0,
        placement: VizPlacement::Symmetric,
    }
}

fn mode(m: VizMode) -> Mode {
    match m {
        VizMode::Raw => Mode::Raw,
        VizMode::Sv => Mode::Sv,
        VizMode::Ap => Mode::Ap,
        VizMode::Svap => Mode::Svap,
        VizMode::SensorPos => Mode::SensorPos,
        VizMode::UnnormSv => Mode::UnnormSv,
        VizMode::Normals => Mode::Normals,
    }
}

fn placement(p: VizPlacement) -> Placement {
    match p {
        VizPlacement::Symmetric => Placement::Symmetric,
        VizPlacement::Midpoint => Placement::Midpoint,
        VizPlacement::Grazing => Placement::Grazing,
    }
}

/// Builds the channel layout for `config.mode`.
///
/// # Safety
/// `cloud` and `config` must be valid pointers; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_augment(
    cloud: *const VizCloud,
    config: *const VizAugmentConfig,
    out: *mut *mut VizAugmented,
) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cloud = handle(cloud, "cloud")?;
        let c = handle(config, "config")?;
        let cfg = AugmentConfig {
            mode: mode(c.mode),
            ap_distance_multiplier: c.ap_distance_multiplier,
            ap_placement: placement(c.placement),
            ..AugmentConfig::default()
        };
        let aug = augment::augment(&cloud.0, &cfg).map_err(viz)?;
        *out = Box::into_raw(Box::new(VizAugmented(aug)));
        Ok(())
    })
}

/// # Safety
/// `aug` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn viz_augmented_rows(aug: *const VizAugmented) -> usize {
    aug.as_ref().map_or(0, |a| a.0.len())
}

/// # Safety
/// `aug` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn viz_augmented_width(aug: *const VizAugmented) -> usize {
    aug.as_ref().map_or(0, |a| a.0.width)
}

/// Copies the row-major channel matrix (`rows * width` doubles).
///
/// # Safety
/// `aug` must be a live handle; `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn viz_augmented_copy(aug: *const VizAugmented, out: *mut f64, capacity: usize) -> VizStatus {
    guard(|| copy_out(&handle(aug, "augmented cloud")?.0.data, out, capacity))
}

/// # Safety
/// `aug` must come from `viz_augment` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn viz_augmented_free(aug: *mut VizAugmented) {
    if !aug.is_null() {
        drop(Box::from_raw(aug));
    }
}

// ---- reconstruction and metrics ----

/// Reconstructs a mesh at `resolution`³. `param` is the carving truncation
/// or density bandwidth; zero or negative selects the default.
///
/// # Safety
/// `cloud` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_reconstruct(
    cloud: *const VizCloud,
    method: VizMethod,
    resolution: usize,
    param: f64,
    out: *mut *mut VizMesh,
) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cloud = handle(cloud, "cloud")?;
        let method = match method {
            VizMethod::Carve => Method::Carve,
            VizMethod::Density => Method::Density,
        };
        let param = (param > 0.0).then_some(param);
        let (mesh, _) = reconstruct_pipeline(&cloud.0, method, resolution, param).map_err(viz)?;
        *out = Box::into_raw(Box::new(VizMesh(mesh)));
        Ok(())
    })
}

/// IoU, Chamfer ×100 and normal consistency with `samples` points each.
///
/// # Safety
/// `gt` and `pred` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn viz_evaluate(
    gt: *const VizMesh,
    pred: *const VizMesh,
    samples: usize,
    seed: u64,
    out: *mut VizMetrics,
) -> VizStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let gt = handle(gt, "gt")?;
        let pred = handle(pred, "pred")?;
        if samples == 0 {
            return Err(fail(VizStatus::InvalidArgument, "samples must be positive"));
        }
        let cfg = EvalConfig {
            n_volume_samples: samples,
            n_surface_samples: samples,
            seed,
        };
        let r = evaluate(&gt.0, &pred.0, &cfg).map_err(viz)?;
        *out = VizMetrics {
            iou: r.iou.unwrap_or(0.0),
            has_iou: r.iou.is_some(),
            chamfer_x100: r.chamfer_x100,
            normal_consistency: r.normal_consistency,
        };
        Ok(())
    })
}
