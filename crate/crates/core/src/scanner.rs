//! Virtual range scanning: sensors on two concentric spheres around the mesh
//! cast rays at a target sphere inside it; each first hit becomes a point that
//! remembers the sensor that observed it.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VizError};
use crate::geom::{Similarity, Vec3};
use crate::mesh::TriangleMesh;
use crate::ply::{self, ElementDef, Property, Scalar};
use crate::rng::{self, domain};

/// Minimum separation between a point and its sensor.
pub const MIN_SENSOR_DISTANCE: f64 = 1e-9;

/// Consecutive misses allowed per requested point before giving up.
pub const MISS_BUDGET_PER_POINT: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub n_points: usize,
    pub n_sensors: usize,
    /// Standard deviation of the per-coordinate Gaussian position noise.
    pub noise_sigma: f64,
    /// Radii of the two sensor spheres as multiples of the bounding-sphere radius.
    pub sphere_radius_factors: (f64, f64),
    /// Restrict sensors to the upper (+z) half of each sphere.
    pub hemisphere_mode: bool,
    pub seed: u64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            n_points: 3000,
            n_sensors: 10,
            noise_sigma: 0.005,
            sphere_radius_factors: (1.5, 2.5),
            hemisphere_mode: false,
            seed: 0,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(VizError::invalid("n_points must be positive"));
        }
        if self.n_sensors == 0 {
            return Err(VizError::invalid("n_sensors must be positive"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(VizError::invalid("noise sigma must be a finite value >= 0"));
        }
        let (a, b) = self.sphere_radius_factors;
        if !(a > 1.0 && b > 1.0) || !a.is_finite() || !b.is_finite() {
            return Err(VizError::invalid("sphere radius factors must both exceed 1"));
        }
        Ok(())
    }
}

/// Points with the position of the sensor that observed each of them.
#[derive(Clone, Debug, PartialEq)]
pub struct ScannedPointCloud {
    pub points: Vec<Vec3>,
    pub sensors: Vec<Vec3>,
    /// Face normals of the hit triangles, when known.
    pub gt_normals: Option<Vec<Vec3>>,
    /// Normalization applied to the source mesh before scanning.
    pub frame: Similarity,
    /// Seed of the scan that produced the cloud, when known.
    pub seed: Option<u64>,
}

impl ScannedPointCloud {
    pub fn new(points: Vec<Vec3>, sensors: Vec<Vec3>, gt_normals: Option<Vec<Vec3>>) -> Result<Self> {
        let pc = ScannedPointCloud {
            points,
            sensors,
            gt_normals,
            frame: Similarity::IDENTITY,
            seed: None,
        };
        pc.validate()?;
        Ok(pc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.sensors.len() {
            return Err(VizError::invalid(format!(
                "{} points but {} sensors",
                self.points.len(),
                self.sensors.len()
            )));
        }
        if let Some(n) = &self.gt_normals {
            if n.len() != self.points.len() {
                return Err(VizError::invalid("normal count differs from point count"));
            }
        }
        for (index, (x, s)) in self.points.iter().zip(&self.sensors).enumerate() {
            if !((s - x).norm() > MIN_SENSOR_DISTANCE) {
                return Err(VizError::CoincidentSensor { index });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> ScannedPointCloud {
        ScannedPointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            sensors: indices.iter().map(|&i| self.sensors[i]).collect(),
            gt_normals: self
                .gt_normals
                .as_ref()
                .map(|n| indices.iter().map(|&i| n[i]).collect()),
            frame: self.frame,
            seed: self.seed,
        }
    }
}

/// Draws `n_sensors` positions: each picks one of the two spheres uniformly,
/// then a uniform point on it (upper half only in hemisphere mode).
pub fn place_sensors(mesh: &TriangleMesh, config: &ScanConfig) -> Result<Vec<Vec3>> {
    config.validate()?;
    let bound = mesh.bounding_sphere()?;
    let (f0, f1) = config.sphere_radius_factors;
    Ok((0..config.n_sensors)
        .map(|i| {
            let mut r = rng::stream(config.seed, domain::SENSORS, i as u64);
            let radius = bound.radius * if r.random::<bool>() { f1 } else { f0 };
            loop {
                let u = Vec3::from(UnitSphere.sample(&mut r));
                if !config.hemisphere_mode || u.z >= 0.0 {
                    break bound.center + u * radius;
                }
            }
        })
        .collect())
}

/// Scans `mesh` into exactly `config.n_points` points.
///
/// Rays are numbered; ray `i` draws its sensor and target from its own random
/// stream and hits are kept in ray order, so the output is bit-identical for
/// any thread count. Noise is added afterwards to positions only.
pub fn scan(mesh: &TriangleMesh, config: &ScanConfig) -> Result<ScannedPointCloud> {
    let sensors = place_sensors(mesh, config)?;
    scan_with_sensors(mesh, &sensors, config)
}

pub fn scan_with_sensors(mesh: &TriangleMesh, sensors: &[Vec3], config: &ScanConfig) -> Result<ScannedPointCloud> {
    config.validate()?;
    if sensors.is_empty() {
        return Err(VizError::invalid("no sensors"));
    }
    let target = mesh.inscribed_target_sphere()?;
    let n = config.n_points;
    let batch = n.clamp(256, 1 << 16);
    let budget = MISS_BUDGET_PER_POINT.saturating_mul(n);

    let mut points = Vec::with_capacity(n);
    let mut owners = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    let mut next_ray = 0u64;
    let mut misses = 0usize;
    while points.len() < n {
        let hits: Vec<_> = (next_ray..next_ray + batch as u64)
            .into_par_iter()
            .map(|i| {
                let mut r = rng::stream(config.seed, domain::RAYS, i);
                let s = sensors[r.random_range(0..sensors.len())];
                let t = target.center + Vec3::from(UnitSphere.sample(&mut r)) * target.radius;
                let dir = (t - s).normalize();
                mesh.ray_intersect(&s, &dir).map(|h| (h.point, s, h.normal))
            })
            .collect();
        next_ray += batch as u64;
        for hit in hits {
            match hit {
                Some((p, s, nrm)) => {
                    points.push(p);
                    owners.push(s);
                    normals.push(nrm);
                    misses = 0;
                    if points.len() == n {
                        break;
                    }
                }
                None => {
                    misses += 1;
                    if misses >= budget {
                        return Err(VizError::Unreachable);
                    }
                }
            }
        }
    }

    if config.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, config.noise_sigma).expect("sigma validated");
        points
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, p)| {
                let mut r = rng::stream(config.seed, domain::NOISE, i as u64);
                *p += Vec3::new(normal.sample(&mut r), normal.sample(&mut r), normal.sample(&mut r));
            });
    }

    let mut pc = ScannedPointCloud::new(points, owners, Some(normals))?;
    pc.seed = Some(config.seed);
    Ok(pc)
}

/// Keeps at most one point per voxel of edge `voxel_size`: the member nearest
/// the voxel's member centroid (lowest index on ties). Output is sorted by
/// voxel index.
pub fn decimate_voxel(pc: &ScannedPointCloud, voxel_size: f64) -> Result<ScannedPointCloud> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(VizError::invalid("voxel size must be positive"));
    }
    let mut cells: BTreeMap<[i64; 3], Vec<usize>> = BTreeMap::new();
    for (i, p) in pc.points.iter().enumerate() {
        let key = [0, 1, 2].map(|a| (p[a] / voxel_size).floor() as i64);
        cells.entry(key).or_default().push(i);
    }
    let keep: Vec<usize> = cells
        .values()
        .map(|members| {
            let centroid = members.iter().map(|&i| pc.points[i]).sum::<Vec3>() / members.len() as f64;
            *members
                .iter()
                .min_by(|&&a, &&b| {
                    let da = (pc.points[a] - centroid).norm_squared();
                    let db = (pc.points[b] - centroid).norm_squared();
                    da.total_cmp(&db).then(a.cmp(&b))
                })
                .expect("voxel has members")
        })
        .collect();
    Ok(pc.select(&keep))
}

const SEED_TAG: &str = "viziscan scan seed=";
const FRAME_TAG: &str = "viziscan frame ";

/// Writes the sensor-cloud PLY: float32 `x y z sx sy sz [nx ny nz]`.
pub fn save_cloud(pc: &ScannedPointCloud, normals: Option<&[Vec3]>, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| VizError::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_cloud(pc, normals, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| VizError::io(path, e))
}

pub fn write_cloud(pc: &ScannedPointCloud, normals: Option<&[Vec3]>, w: &mut impl Write) -> std::io::Result<()> {
    let normals = normals.or(pc.gt_normals.as_deref());
    let mut props: Vec<Property> = ["x", "y", "z", "sx", "sy", "sz"]
        .iter()
        .map(|n| Property::scalar(n, Scalar::F32))
        .collect();
    if normals.is_some() {
        props.extend(["nx", "ny", "nz"].iter().map(|n| Property::scalar(n, Scalar::F32)));
    }
    let mut comments = Vec::new();
    if let Some(seed) = pc.seed {
        comments.push(format!("{SEED_TAG}{seed}"));
    }
    let f = pc.frame;
    comments.push(format!(
        "{FRAME_TAG}scale={:e} tx={:e} ty={:e} tz={:e}",
        f.scale, f.translation[0], f.translation[1], f.translation[2]
    ));
    let def = ElementDef {
        name: "vertex".into(),
        count: pc.len(),
        properties: props,
    };
    ply::write_header(w, &comments, &[def])?;
    for i in 0..pc.len() {
        for c in pc.points[i].iter().chain(pc.sensors[i].iter()) {
            ply::put_f32(w, *c)?;
        }
        if let Some(n) = normals {
            for c in n[i].iter() {
                ply::put_f32(w, *c)?;
            }
        }
    }
    Ok(())
}

pub fn load_cloud(path: &Path) -> Result<ScannedPointCloud> {
    let bytes = fs::read(path).map_err(|e| VizError::io(path, e))?;
    parse_cloud(&bytes)
}

pub fn parse_cloud(bytes: &[u8]) -> Result<ScannedPointCloud> {
    let data = ply::parse(bytes)?;
    let v = data
        .element("vertex")
        .ok_or_else(|| VizError::Parse("no vertex element".into()))?;
    let to_vecs = |a: Vec<[f64; 3]>| a.into_iter().map(Vec3::from).collect::<Vec<_>>();
    let points = to_vecs(
        v.vec3(["x", "y", "z"])
            .ok_or_else(|| VizError::Parse("vertex lacks x/y/z".into()))?,
    );
    let sensors = to_vecs(
        v.vec3(["sx", "sy", "sz"])
            .ok_or_else(|| VizError::Parse("cloud lacks sensor positions sx/sy/sz".into()))?,
    );
    let normals = v.vec3(["nx", "ny", "nz"]).map(to_vecs);
    let mut pc = ScannedPointCloud::new(points, sensors, normals)?;
    for c in &data.comments {
        if let Some(s) = c.strip_prefix(SEED_TAG) {
            pc.seed = s.trim().parse().ok();
        } else if let Some(rest) = c.strip_prefix(FRAME_TAG) {
            let mut vals = [1.0, 0.0, 0.0, 0.0];
            for (slot, key) in ["scale=", "tx=", "ty=", "tz="].iter().enumerate() {
                if let Some(v) = rest
                    .split_whitespace()
                    .find_map(|t| t.strip_prefix(key))
                    .and_then(|t| t.parse().ok())
                {
                    vals[slot] = v;
                }
            }
            pc.frame = Similarity {
                scale: vals[0],
                translation: [vals[1], vals[2], vals[3]],
            };
        }
    }
    Ok(pc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives::{cuboid, icosphere};

    fn sigma0(n: usize, seed: u64) -> ScanConfig {
        ScanConfig {
            n_points: n,
            noise_sigma: 0.0,
            seed,
            ..ScanConfig::default()
        }
    }

    #[test]
    fn sensors_lie_on_the_two_spheres() {
        let cube = cuboid(Vec3::repeat(1.0), Vec3::zeros());
        let cfg = ScanConfig {
            n_sensors: 50,
            seed: 3,
            ..ScanConfig::default()
        };
        let s = place_sensors(&cube, &cfg).unwrap();
        assert_eq!(s.len(), 50);
        let r = 3f64.sqrt() / 2.0;
        let mut seen = [false; 2];
        for p in &s {
            let d = p.norm();
            let on0 = (d - 1.5 * r).abs() < 1e-9;
            let on1 = (d - 2.5 * r).abs() < 1e-9;
            assert!(on0 || on1, "{d}");
            seen[on1 as usize] = true;
        }
        assert_eq!(seen, [true, true]);
        assert_eq!(s, place_sensors(&cube, &cfg).unwrap());
    }

    #[test]
    fn hemisphere_sensors_stay_above_center() {
        let cube = cuboid(Vec3::repeat(1.0), Vec3::new(0.0, 0.0, 0.3));
        let cfg = ScanConfig {
            n_sensors: 200,
            hemisphere_mode: true,
            ..ScanConfig::default()
        };
        for s in place_sensors(&cube, &cfg).unwrap() {
            assert!(s.z >= 0.3);
        }
    }

    #[test]
    fn frontal_ray_example() {
        let sphere = icosphere(0.5, 4);
        let sensor = Vec3::new(0.0, 0.0, 1.5);
        let hit = sphere.ray_intersect(&sensor, &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        let pc = scan_with_sensors(&sphere, &[sensor], &sigma0(200, 1)).unwrap();
        // Every point observed from this sensor; the axial ray lands at (0, 0, ~0.5).
        assert!(pc.sensors.iter().all(|s| *s == sensor));
        assert!((hit.point - Vec3::new(0.0, 0.0, 0.5)).norm() < 1e-3);
        assert!(hit.point.z <= 0.5);
    }

    #[test]
    fn noiseless_points_are_on_the_surface_and_visible() {
        let sphere = icosphere(0.5, 3);
        let pc = scan(&sphere, &sigma0(1000, 7)).unwrap();
        assert_eq!(pc.len(), 1000);
        assert_eq!(pc.sensors.len(), 1000);
        for (x, s) in pc.points.iter().zip(&pc.sensors) {
            assert!(sphere.distance_to_surface(x).unwrap() < 1e-6);
            let dir = (x - s).normalize();
            let again = sphere.ray_intersect(s, &dir).unwrap();
            assert!((again.point - x).norm() < 1e-9);
            // Convex mesh: nothing strictly between the sensor and the hit.
            assert!(again.t >= (x - s).norm() - 1e-9);
        }
    }

    #[test]
    fn stored_normals_are_the_hit_triangle_normals() {
        let cube = cuboid(Vec3::repeat(1.0), Vec3::zeros());
        let pc = scan(&cube, &sigma0(500, 2)).unwrap();
        for (x, n) in pc.points.iter().zip(pc.gt_normals.as_ref().unwrap()) {
            assert!((x.dot(n) - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_has_the_requested_normal_component() {
        let cube = cuboid(Vec3::repeat(1.0), Vec3::zeros());
        let cfg = ScanConfig {
            seed: 17,
            ..ScanConfig::default()
        };
        let pc = scan(&cube, &cfg).unwrap();
        assert_eq!(pc.len(), 3000);
        let normals = pc.gt_normals.as_ref().unwrap();
        let ms: f64 = pc
            .points
            .iter()
            .zip(normals)
            .map(|(x, n)| (x.dot(n) - 0.5).powi(2))
            .sum::<f64>()
            / pc.len() as f64;
        let rms = ms.sqrt();
        assert!((0.0045..=0.0055).contains(&rms), "{rms}");
    }

    #[test]
    fn scan_is_deterministic() {
        let sphere = icosphere(0.5, 2);
        let cfg = ScanConfig {
            n_points: 700,
            seed: 99,
            ..ScanConfig::default()
        };
        assert_eq!(scan(&sphere, &cfg).unwrap(), scan(&sphere, &cfg).unwrap());
    }

    #[test]
    fn unreachable_mesh_is_an_error() {
        let sq = crate::mesh::primitives::square(0.0);
        let one = ScanConfig {
            n_points: 1,
            ..ScanConfig::default()
        };
        assert!(matches!(scan(&sq, &one), Err(VizError::ZeroExtent)));

        // Two small triangles at opposite corners of a 2x2x2 box; a sensor on
        // the +z axis sees the target sphere through a cone that misses both.
        let v = vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(0.99, 1.0, 1.0),
            Vec3::new(1.0, 0.99, 1.0),
            Vec3::new(-1.0, -1.0, -1.0),
            Vec3::new(-0.99, -1.0, -1.0),
            Vec3::new(-1.0, -0.99, -1.0),
        ];
        let corners = TriangleMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let sensor = Vec3::new(0.0, 0.0, 10.0);
        let err = scan_with_sensors(&corners, &[sensor], &one).unwrap_err();
        assert!(matches!(err, VizError::Unreachable));
    }

    #[test]
    fn config_validation() {
        let bad = [
            ScanConfig { n_points: 0, ..ScanConfig::default() },
            ScanConfig { n_sensors: 0, ..ScanConfig::default() },
            ScanConfig { noise_sigma: -1.0, ..ScanConfig::default() },
            ScanConfig { sphere_radius_factors: (1.0, 2.0), ..ScanConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn decimation_examples() {
        let pts = vec![Vec3::new(0.001, 0.001, 0.001), Vec3::new(0.002, 0.001, 0.001)];
        let sensors = vec![Vec3::new(0.0, 0.0, 5.0); 2];
        let pc = ScannedPointCloud::new(pts, sensors, None).unwrap();
        assert_eq!(decimate_voxel(&pc, 0.01).unwrap().len(), 1);

        let spread: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.5, 0.5)).collect();
        let pc = ScannedPointCloud::new(spread.clone(), vec![Vec3::new(0.0, 0.0, 9.0); 5], None).unwrap();
        let out = decimate_voxel(&pc, 0.1).unwrap();
        assert_eq!(out.points, spread);
        assert!(decimate_voxel(&pc, 0.0).is_err());
    }

    #[test]
    fn decimation_keeps_one_point_per_voxel() {
        let mut r = rng::stream(1, 0, 0);
        let pts: Vec<Vec3> = (0..10_000)
            .map(|_| Vec3::new(r.random(), r.random(), r.random()))
            .collect();
        let pc = ScannedPointCloud::new(pts, vec![Vec3::new(5.0, 5.0, 5.0); 10_000], None).unwrap();
        let out = decimate_voxel(&pc, 0.1).unwrap();
        assert!(out.len() <= 1000);
        let mut keys: Vec<[i64; 3]> = out
            .points
            .iter()
            .map(|p| [0, 1, 2].map(|a| (p[a] / 0.1).floor() as i64))
            .collect();
        let sorted = keys.clone();
        keys.dedup();
        assert_eq!(keys.len(), out.len());
        let mut resorted = sorted.clone();
        resorted.sort();
        assert_eq!(sorted, resorted);
    }

    #[test]
    fn cloud_ply_round_trip() {
        let sphere = icosphere(0.5, 2);
        let mut pc = scan(&sphere, &ScanConfig { n_points: 50, seed: 5, ..ScanConfig::default() }).unwrap();
        pc.frame = Similarity {
            scale: 0.5,
            translation: [0.1, -0.2, 0.3],
        };
        let mut buf = Vec::new();
        write_cloud(&pc, None, &mut buf).unwrap();
        let back = parse_cloud(&buf).unwrap();
        assert_eq!(back.len(), 50);
        assert_eq!(back.seed, Some(5));
        assert_eq!(back.frame, pc.frame);
        assert!(back.gt_normals.is_some());
        for (a, b) in back.points.iter().zip(&pc.points) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn coincident_point_and_sensor_rejected() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let err = ScannedPointCloud::new(vec![Vec3::zeros(), p], vec![Vec3::x(), p], None).unwrap_err();
        assert!(matches!(err, VizError::CoincidentSensor { index: 1 }));
    }
}
