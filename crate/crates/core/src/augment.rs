//! Visibility augmentation: sightline vectors, auxiliary points with type
//! tags, and the channel layouts fed to point-based networks.
//!
//! Rows are laid out as `X ⊕ v ⊕ t` with absent blocks omitted. When auxiliary
//! points are present each source point contributes its observed row, then its
//! before row(s), then its after row.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VizError};
use crate::geom::Vec3;
use crate::kdtree::KdTree;
use crate::ply::{self, ElementDef, Property, Scalar};
use crate::scanner::{ScannedPointCloud, MIN_SENSOR_DISTANCE};

pub const TAG_OBSERVED: [f64; 2] = [0.0, 0.0];
pub const TAG_BEFORE: [f64; 2] = [1.0, 0.0];
pub const TAG_AFTER: [f64; 2] = [0.0, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Raw,
    Sv,
    Ap,
    Svap,
    SensorPos,
    UnnormSv,
    Normals,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Raw,
        Mode::Sv,
        Mode::Ap,
        Mode::Svap,
        Mode::SensorPos,
        Mode::UnnormSv,
        Mode::Normals,
    ];

    pub fn width(self) -> usize {
        match self {
            Mode::Raw => 3,
            Mode::Ap => 5,
            Mode::Sv | Mode::SensorPos | Mode::UnnormSv | Mode::Normals => 6,
            Mode::Svap => 8,
        }
    }

    pub fn has_sightlines(self) -> bool {
        matches!(self, Mode::Sv | Mode::Svap)
    }

    pub fn has_auxiliary(self) -> bool {
        matches!(self, Mode::Ap | Mode::Svap)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Raw => "RAW",
            Mode::Sv => "SV",
            Mode::Ap => "AP",
            Mode::Svap => "SVAP",
            Mode::SensorPos => "SENSOR_POS",
            Mode::UnnormSv => "UNNORM_SV",
            Mode::Normals => "NORMALS",
        }
    }

    /// Names of the channels following `x y z`.
    fn extra_channels(self) -> &'static [&'static str] {
        match self {
            Mode::Raw => &[],
            Mode::Sv => &["vx", "vy", "vz"],
            Mode::Ap => &["t0", "t1"],
            Mode::Svap => &["vx", "vy", "vz", "t0", "t1"],
            Mode::SensorPos => &["sx", "sy", "sz"],
            Mode::UnnormSv => &["ux", "uy", "uz"],
            Mode::Normals => &["nx", "ny", "nz"],
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = VizError;

    fn from_str(s: &str) -> Result<Mode> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| VizError::invalid(format!("unknown mode {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Placement {
    #[default]
    Symmetric,
    Midpoint,
    Grazing,
}

impl FromStr for Placement {
    type Err = VizError;

    fn from_str(s: &str) -> Result<Placement> {
        match s.trim().to_ascii_lowercase().as_str() {
            "symmetric" => Ok(Placement::Symmetric),
            "midpoint" => Ok(Placement::Midpoint),
            "grazing" => Ok(Placement::Grazing),
            _ => Err(VizError::invalid(format!("unknown placement {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub mode: Mode,
    pub ap_distance_multiplier: f64,
    pub ap_placement: Placement,
    /// Acceptance radius for grazing samples; defaults to `d`.
    pub grazing_radius: Option<f64>,
    /// Use the mean distance to the `k` nearest neighbours of each point as
    /// its own offset scale instead of the global `d`.
    pub local_knn: Option<usize>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            mode: Mode::Svap,
            ap_distance_multiplier: 1.0,
            ap_placement: Placement::Symmetric,
            grazing_radius: None,
            local_knn: None,
        }
    }
}

impl AugmentConfig {
    pub fn with_mode(mode: Mode) -> Self {
        AugmentConfig {
            mode,
            ..AugmentConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ap_distance_multiplier > 0.0) || !self.ap_distance_multiplier.is_finite() {
            return Err(VizError::invalid("AP distance multiplier must be positive"));
        }
        if let Some(r) = self.grazing_radius {
            if !(r > 0.0) {
                return Err(VizError::invalid("grazing radius must be positive"));
            }
        }
        if self.local_knn == Some(0) {
            return Err(VizError::invalid("local kNN count must be positive"));
        }
        Ok(())
    }
}

/// Channel rows stored flat, `width` values per row.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedPointCloud {
    pub data: Vec<f64>,
    pub width: usize,
    pub mode: Mode,
    pub characteristic_distance: Option<f64>,
    /// Source point index of every row.
    pub parents: Vec<usize>,
}

impl AugmentedPointCloud {
    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width)
    }

    pub fn position(&self, i: usize) -> Vec3 {
        let r = self.row(i);
        Vec3::new(r[0], r[1], r[2])
    }

    /// The tag block of row `i`, if the layout has one.
    pub fn tag(&self, i: usize) -> Option<[f64; 2]> {
        self.mode.has_auxiliary().then(|| {
            let r = self.row(i);
            [r[self.width - 2], r[self.width - 1]]
        })
    }

    /// The sightline block of row `i`, if the layout has one.
    pub fn sightline(&self, i: usize) -> Option<Vec3> {
        self.mode.has_sightlines().then(|| {
            let r = self.row(i);
            Vec3::new(r[3], r[4], r[5])
        })
    }

    fn push(&mut self, parent: usize, x: &Vec3, extra: &[f64]) {
        self.data.extend_from_slice(x.as_slice());
        self.data.extend_from_slice(extra);
        self.parents.push(parent);
    }
}

/// Mean nearest-neighbour distance over the cloud. Duplicate points add zero.
pub fn characteristic_distance(points: &[Vec3]) -> Result<f64> {
    if points.len() < 2 {
        return Err(VizError::invalid("characteristic distance needs at least 2 points"));
    }
    let tree = KdTree::new(points);
    let nn: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| tree.nearest_other(p, i).expect("at least two points").dist2.sqrt())
        .collect();
    Ok(nn.iter().sum::<f64>() / points.len() as f64)
}

/// Per-point mean distance to the `k` nearest other points.
pub fn local_distances(points: &[Vec3], k: usize) -> Result<Vec<f64>> {
    if k == 0 || points.len() <= k {
        return Err(VizError::invalid(format!(
            "local distance needs more than k={k} points, got {}",
            points.len()
        )));
    }
    let tree = KdTree::new(points);
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let near = tree.knn(p, k + 1);
            let d: Vec<f64> = near.iter().filter(|n| n.index != i).take(k).map(|n| n.dist2.sqrt()).collect();
            d.iter().sum::<f64>() / d.len() as f64
        })
        .collect())
}

/// Unit vectors from each point toward its sensor.
pub fn sightline_vectors(pc: &ScannedPointCloud) -> Result<Vec<Vec3>> {
    if pc.points.len() != pc.sensors.len() {
        return Err(VizError::invalid("point and sensor counts differ"));
    }
    pc.points
        .iter()
        .zip(&pc.sensors)
        .enumerate()
        .map(|(index, (x, s))| {
            let u = s - x;
            let len = u.norm();
            if !(len > MIN_SENSOR_DISTANCE) {
                return Err(VizError::CoincidentSensor { index });
            }
            Ok(u / len)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxiliaryPoint {
    pub position: Vec3,
    pub tag: [f64; 2],
    pub parent: usize,
}

/// Auxiliary points for every source point, grouped by parent in input order
/// with before-points ahead of the after-point.
pub fn auxiliary_points(pc: &ScannedPointCloud, d: f64, config: &AugmentConfig) -> Result<Vec<AuxiliaryPoint>> {
    Ok(auxiliary_groups(pc, d, config)?.into_iter().flatten().collect())
}

fn auxiliary_groups(pc: &ScannedPointCloud, d: f64, config: &AugmentConfig) -> Result<Vec<Vec<AuxiliaryPoint>>> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(VizError::invalid(format!("characteristic distance must be positive, got {d}")));
    }
    config.validate()?;
    let v = sightline_vectors(pc)?;
    let m = config.ap_distance_multiplier;
    let scale: Vec<f64> = match config.local_knn {
        Some(k) => local_distances(&pc.points, k)?.into_iter().map(|l| m * l).collect(),
        None => vec![m * d; pc.len()],
    };
    let grazing_radius = config.grazing_radius.unwrap_or(d);
    let tree = (config.ap_placement == Placement::Grazing).then(|| KdTree::new(&pc.points));

    Ok((0..pc.len())
        .into_par_iter()
        .map(|p| {
            let x = pc.points[p];
            let s = pc.sensors[p];
            let mut group = Vec::with_capacity(2);
            match config.ap_placement {
                Placement::Symmetric => group.push(AuxiliaryPoint {
                    position: x + scale[p] * v[p],
                    tag: TAG_BEFORE,
                    parent: p,
                }),
                Placement::Midpoint => group.push(AuxiliaryPoint {
                    position: (x + s) / 2.0,
                    tag: TAG_BEFORE,
                    parent: p,
                }),
                Placement::Grazing => {
                    let tree = tree.as_ref().expect("built for grazing");
                    let len = (x - s).norm();
                    let dir = (x - s) / len;
                    let steps = (len / d).ceil() as usize;
                    for k in 1..steps {
                        let q = s + dir * (k as f64 * d);
                        let near = tree.nearest(&q).expect("cloud is not empty");
                        if near.index != p && near.dist2.sqrt() < grazing_radius {
                            group.push(AuxiliaryPoint {
                                position: q,
                                tag: TAG_BEFORE,
                                parent: p,
                            });
                        }
                    }
                }
            }
            group.push(AuxiliaryPoint {
                position: x - scale[p] * v[p],
                tag: TAG_AFTER,
                parent: p,
            });
            group
        })
        .collect())
}

/// Builds the RAW, SV, AP or SVAP layout. `d` is required only when the mode
/// has auxiliary points.
pub fn assemble_channels(pc: &ScannedPointCloud, config: &AugmentConfig, d: Option<f64>) -> Result<AugmentedPointCloud> {
    let mode = config.mode;
    if !matches!(mode, Mode::Raw | Mode::Sv | Mode::Ap | Mode::Svap) {
        return variant_channels(pc, mode);
    }
    let mut out = AugmentedPointCloud {
        data: Vec::new(),
        width: mode.width(),
        mode,
        characteristic_distance: d,
        parents: Vec::new(),
    };
    if mode == Mode::Raw {
        for (p, x) in pc.points.iter().enumerate() {
            out.push(p, x, &[]);
        }
        return Ok(out);
    }
    let v = sightline_vectors(pc)?;
    let groups = if mode.has_auxiliary() {
        let d = d.ok_or(VizError::ModeMismatch {
            mode: mode.to_string(),
            missing: "characteristic distance",
        })?;
        Some(auxiliary_groups(pc, d, config)?)
    } else {
        None
    };
    let rows_per_point = if groups.is_some() { 3 } else { 1 };
    out.data.reserve(pc.len() * rows_per_point * out.width);
    for (p, x) in pc.points.iter().enumerate() {
        let vb = v[p];
        let block = |tag: [f64; 2]| -> Vec<f64> {
            match mode {
                Mode::Sv => vb.as_slice().to_vec(),
                Mode::Ap => tag.to_vec(),
                _ => [vb.as_slice(), &tag[..]].concat(),
            }
        };
        out.push(p, x, &block(TAG_OBSERVED));
        if let Some(groups) = &groups {
            for aux in &groups[p] {
                out.push(p, &aux.position, &block(aux.tag));
            }
        }
    }
    Ok(out)
}

/// Ablation layouts: sensor position, unnormalized point-to-sensor vector, or
/// the stored ground-truth normals.
pub fn variant_channels(pc: &ScannedPointCloud, mode: Mode) -> Result<AugmentedPointCloud> {
    match mode {
        Mode::SensorPos | Mode::UnnormSv => {
            pc.validate()?;
            let mut out = AugmentedPointCloud {
                data: Vec::with_capacity(pc.len() * 6),
                width: 6,
                mode,
                characteristic_distance: None,
                parents: Vec::with_capacity(pc.len()),
            };
            for (p, (x, s)) in pc.points.iter().zip(&pc.sensors).enumerate() {
                let extra = if mode == Mode::SensorPos { *s } else { s - x };
                out.push(p, x, extra.as_slice());
            }
            Ok(out)
        }
        Mode::Normals => match &pc.gt_normals {
            Some(n) => normals_channels(pc, n),
            None => Err(VizError::ModeMismatch {
                mode: mode.to_string(),
                missing: "normals",
            }),
        },
        _ => Err(VizError::invalid(format!("{mode} is not a variant layout"))),
    }
}

/// `X ⊕ n` rows with the given per-point normals.
pub fn normals_channels(pc: &ScannedPointCloud, normals: &[Vec3]) -> Result<AugmentedPointCloud> {
    if normals.len() != pc.len() {
        return Err(VizError::invalid("normal count differs from point count"));
    }
    let mut out = AugmentedPointCloud {
        data: Vec::with_capacity(pc.len() * 6),
        width: 6,
        mode: Mode::Normals,
        characteristic_distance: None,
        parents: Vec::with_capacity(pc.len()),
    };
    for (p, (x, n)) in pc.points.iter().zip(normals).enumerate() {
        out.push(p, x, n.as_slice());
    }
    Ok(out)
}

/// Computes `d` when needed and builds the layout for `config.mode`.
pub fn augment(pc: &ScannedPointCloud, config: &AugmentConfig) -> Result<AugmentedPointCloud> {
    config.validate()?;
    if pc.is_empty() {
        return Err(VizError::EmptyCloud);
    }
    let d = if config.mode.has_auxiliary() {
        Some(characteristic_distance(&pc.points)?)
    } else {
        None
    };
    assemble_channels(pc, config, d)
}

/// Sidecar describing how an augmented cloud was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSidecar {
    pub mode: Mode,
    pub d: Option<f64>,
    pub multiplier: f64,
    pub placement: Placement,
    pub local_knn: Option<usize>,
    pub rows: usize,
    pub width: usize,
    pub seed: Option<u64>,
    pub source: Option<String>,
}

const MODE_TAG: &str = "viziscan mode=";

/// Writes float32 `x y z [extra channels]` plus an `int parent` column.
pub fn write_augmented(aug: &AugmentedPointCloud, w: &mut impl Write) -> std::io::Result<()> {
    let mut props: Vec<Property> = ["x", "y", "z"]
        .iter()
        .chain(aug.mode.extra_channels())
        .map(|n| Property::scalar(n, Scalar::F32))
        .collect();
    props.push(Property::scalar("parent", Scalar::I32));
    let d = aug.characteristic_distance.map_or("none".to_string(), |d| format!("{d:e}"));
    let comments = [format!("{MODE_TAG}{} d={d}", aug.mode)];
    let def = ElementDef {
        name: "vertex".into(),
        count: aug.len(),
        properties: props,
    };
    ply::write_header(w, &comments, &[def])?;
    for (row, &parent) in aug.rows().zip(&aug.parents) {
        for &c in row {
            ply::put_f32(w, c)?;
        }
        ply::put_i32(w, parent as i32)?;
    }
    Ok(())
}

pub fn save_augmented(aug: &AugmentedPointCloud, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| VizError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_augmented(aug, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| VizError::io(path, e))
}

pub fn parse_augmented(bytes: &[u8]) -> Result<AugmentedPointCloud> {
    let data = ply::parse(bytes)?;
    let comment = data
        .comments
        .iter()
        .find_map(|c| c.strip_prefix(MODE_TAG))
        .ok_or_else(|| VizError::Parse("missing mode comment".into()))?;
    let mut parts = comment.split_whitespace();
    let mode: Mode = parts.next().unwrap_or("").parse()?;
    let d = parts
        .find_map(|t| t.strip_prefix("d="))
        .and_then(|t| t.parse::<f64>().ok());
    let v = data
        .element("vertex")
        .ok_or_else(|| VizError::Parse("no vertex element".into()))?;
    let columns: Vec<&[f64]> = ["x", "y", "z"]
        .iter()
        .chain(mode.extra_channels())
        .map(|n| v.scalar(n).ok_or_else(|| VizError::Parse(format!("missing channel {n}"))))
        .collect::<Result<_>>()?;
    let parents = v
        .scalar("parent")
        .map(|p| p.iter().map(|&x| x as usize).collect())
        .unwrap_or_else(|| (0..v.len()).collect());
    let mut out = AugmentedPointCloud {
        data: Vec::with_capacity(v.len() * columns.len()),
        width: columns.len(),
        mode,
        characteristic_distance: d,
        parents,
    };
    for i in 0..v.len() {
        out.data.extend(columns.iter().map(|c| c[i]));
    }
    Ok(out)
}
