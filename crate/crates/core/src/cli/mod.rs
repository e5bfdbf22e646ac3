//! Command-line interface: `scan`, `augment`, `reconstruct`, `eval`,
//! `pipeline` and `shapes`. Every command writes `<output>.manifest.json`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::augment::{Mode, Placement};
use crate::error::VizError;
use crate::reconstruct::{Fill, Method, MIN_RESOLUTION};

pub use commands::{NormalSource, SummaryRow};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "VIZISCAN_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] VizError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

/// Validation failures on parsed flags are usage errors.
pub(crate) fn usage(e: VizError) -> CliError {
    CliError::Usage(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "viziscan", version, about = "Virtual scanning, visibility augmentation, carving reconstruction and mesh metrics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scan a mesh into a sensor-aware point cloud.
    Scan(ScanArgs),
    /// Add sightline vectors and/or auxiliary points to a scanned cloud.
    Augment(AugmentArgs),
    /// Reconstruct a mesh from a scanned cloud.
    Reconstruct(ReconstructArgs),
    /// Compare a predicted mesh with a ground-truth mesh.
    Eval(EvalArgs),
    /// Scan, augment, reconstruct and evaluate every mesh in a directory.
    Pipeline(PipelineArgs),
    /// Write the procedural reference shapes (sphere, box, cup).
    Shapes(ShapesArgs),
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ScanArgs {
    /// Input mesh (PLY or OBJ).
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long, default_value_t = 3000, value_parser = positive_count)]
    pub n_points: usize,
    #[arg(long, default_value_t = 10, value_parser = positive_count)]
    pub n_scanners: usize,
    /// Gaussian noise standard deviation per coordinate.
    #[arg(long, default_value_t = 0.005, value_parser = non_negative)]
    pub noise: f64,
    /// Sensor sphere radii as multiples of the bounding-sphere radius.
    #[arg(long, default_value = "1.5,2.5", value_parser = radius_factors)]
    pub radius_factors: RadiusFactors,
    /// Keep sensors in the upper hemispheres.
    #[arg(long)]
    pub hemisphere: bool,
    /// Voxel edge for decimation after scanning.
    #[arg(long, value_parser = positive)]
    pub decimate: Option<f64>,
    /// Center the mesh and scale its longest extent to 1 before scanning.
    #[arg(long)]
    pub normalize: bool,
    /// Random seed; drawn and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadiusFactors(pub f64, pub f64);

#[derive(Clone, Debug, Args, Serialize)]
pub struct AugmentArgs {
    /// Sensor-cloud PLY.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// raw, sv, ap, svap, sensor-pos, unnorm-sv or normals.
    #[arg(long, default_value = "svap", value_parser = parse_with::<Mode>)]
    pub mode: Mode,
    /// Auxiliary point offset as a multiple of the characteristic distance.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub ap_dist_mult: f64,
    /// symmetric, midpoint or grazing.
    #[arg(long, default_value = "symmetric", value_parser = parse_with::<Placement>)]
    pub ap_placement: Placement,
    /// Use the mean distance to the k nearest neighbours as a per-point offset.
    #[arg(long, value_parser = positive_count)]
    pub ap_local_knn: Option<usize>,
    /// Acceptance radius for grazing samples (default: characteristic distance).
    #[arg(long, value_parser = positive)]
    pub grazing_radius: Option<f64>,
    /// Normal source for `--mode normals`: gt, mst or sensor.
    #[arg(long, default_value = "gt", value_parser = parse_with::<NormalSource>)]
    pub normals: NormalSource,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ReconstructArgs {
    /// Sensor-cloud PLY.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// carve or density.
    #[arg(long, default_value = "carve", value_parser = parse_with::<Method>)]
    pub method: Method,
    /// Grid resolution per axis (at least 8).
    #[arg(long, default_value_t = 128, value_parser = resolution)]
    pub res: usize,
    /// Carving truncation length, or `auto` for three voxels.
    #[arg(long, default_value = "auto", value_parser = auto_length)]
    pub truncation: AutoLength,
    /// Density bandwidth, or `auto` for twice the characteristic distance.
    #[arg(long, default_value = "auto", value_parser = auto_length)]
    pub bandwidth: AutoLength,
    /// How carving resolves voxels without a vote majority: oriented or flood.
    #[arg(long, default_value = "oriented", value_parser = parse_with::<Fill>)]
    pub fill: Fill,
    #[arg(long)]
    pub out: PathBuf,
}

/// A length flag that also accepts `auto`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct AutoLength(pub Option<f64>);

#[derive(Clone, Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    /// Monte-Carlo samples for each metric.
    #[arg(long, default_value_t = crate::metrics::DEFAULT_SAMPLES, value_parser = positive_count)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// Directory of PLY/OBJ meshes.
    #[arg(long)]
    pub meshes: PathBuf,
    /// Output directory; receives one subdirectory per mesh and summary.csv.
    #[arg(long)]
    pub out: PathBuf,
    /// Meshes processed concurrently.
    #[arg(long, default_value_t = 1, value_parser = positive_count)]
    pub jobs: usize,
    /// Random seed; drawn and recorded when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 3000, value_parser = positive_count)]
    pub n_points: usize,
    #[arg(long, default_value_t = 10, value_parser = positive_count)]
    pub n_scanners: usize,
    #[arg(long, default_value_t = 0.005, value_parser = non_negative)]
    pub noise: f64,
    #[arg(long, default_value_t = 128, value_parser = resolution)]
    pub res: usize,
    #[arg(long, default_value = "svap", value_parser = parse_with::<Mode>)]
    pub mode: Mode,
    #[arg(long, default_value_t = crate::metrics::DEFAULT_SAMPLES, value_parser = positive_count)]
    pub samples: usize,
    /// Normalize each mesh to the unit cube first.
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct ShapesArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_with<T: FromStr<Err = VizError>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: VizError| e.to_string())
}

fn positive_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        Ok(_) => Err("must be at least 1".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn resolution(s: &str) -> Result<usize, String> {
    let n = s.parse::<usize>().map_err(|e| e.to_string())?;
    if n < MIN_RESOLUTION {
        return Err(format!("resolution must be at least {MIN_RESOLUTION}"));
    }
    Ok(n)
}

fn real(s: &str) -> Result<f64, String> {
    let x = s.parse::<f64>().map_err(|e| e.to_string())?;
    if !x.is_finite() {
        return Err("must be finite".into());
    }
    Ok(x)
}

fn positive(s: &str) -> Result<f64, String> {
    let x = real(s)?;
    if x <= 0.0 {
        return Err("must be positive".into());
    }
    Ok(x)
}

fn non_negative(s: &str) -> Result<f64, String> {
    let x = real(s)?;
    if x < 0.0 {
        return Err("must not be negative".into());
    }
    Ok(x)
}

fn radius_factors(s: &str) -> Result<RadiusFactors, String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated factors")?;
    let (a, b) = (real(a.trim())?, real(b.trim())?);
    if a <= 1.0 || b <= 1.0 {
        return Err("radius factors must exceed 1".into());
    }
    Ok(RadiusFactors(a, b))
}

fn auto_length(s: &str) -> Result<AutoLength, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(AutoLength(None));
    }
    positive(s).map(|x| AutoLength(Some(x)))
}

/// Sizes the global thread pool from [`THREADS_ENV`] when set.
fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n = positive_count(value.trim()).map_err(|e| CliError::Usage(format!("{THREADS_ENV}: {e}")))?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("thread pool already initialised; {THREADS_ENV} ignored");
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Scan(a) => commands::scan(a),
        Command::Augment(a) => commands::augment(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Eval(a) => commands::eval(a),
        Command::Pipeline(a) => commands::pipeline(a),
        Command::Shapes(a) => commands::shapes(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
