use super::*;
use crate::mesh::primitives::icosphere;
use crate::scanner::{scan, ScanConfig};

fn sphere_scan(noise: f64, seed: u64) -> ScannedPointCloud {
    let cfg = ScanConfig {
        noise_sigma: noise,
        seed,
        ..ScanConfig::default()
    };
    scan(&icosphere(0.5, 4), &cfg).unwrap()
}

#[test]
fn grid_rejects_low_resolution() {
    let b = Aabb {
        min: Vec3::zeros(),
        max: Vec3::repeat(1.0),
    };
    assert!(OccupancyGrid::covering(&b, 4).is_err());
    let g = OccupancyGrid::covering(&b, 8).unwrap();
    assert!((g.voxel_size * 8.0 - 1.1).abs() < 1e-12);
    assert!(g.bounds().contains(&Vec3::repeat(-0.049)));
}

#[test]
fn single_sightline_votes() {
    let mut g = OccupancyGrid::cube(Vec3::repeat(-1.0), 2.0, 32).unwrap();
    let pc = ScannedPointCloud::new(vec![Vec3::new(0.01, 0.01, 0.5)], vec![Vec3::new(0.01, 0.01, 2.0)], None).unwrap();
    let tau = 3.0 * g.voxel_size;
    g.add_carve_votes(&pc, tau).unwrap();
    // The sightline runs through column (16, 16, *); voxels are 1/16 wide.
    for k in 0..32 {
        let idx = g.index(16, 16, k);
        let lo = -1.0 + k as f64 / 16.0;
        let hi = lo + 1.0 / 16.0;
        if lo > 0.5 + tau {
            assert!(g.empty_votes[idx] > 0 && g.full_votes[idx] == 0, "k={k}");
        }
        if lo >= 0.5 - tau && hi <= 0.5 {
            assert!(g.full_votes[idx] > 0, "k={k}");
        }
        if hi < 0.5 - tau {
            assert_eq!(g.full_votes[idx] + g.empty_votes[idx], 0, "k={k}");
        }
    }
    let touched = (0..g.len()).filter(|&i| g.full_votes[i] + g.empty_votes[i] > 0).count();
    assert!(touched <= 32);
}

#[test]
fn votes_are_monotone_in_the_point_set() {
    let pc = sphere_scan(0.005, 3);
    let mut small = OccupancyGrid::cube(Vec3::repeat(-0.6), 1.2, 32).unwrap();
    small.add_carve_votes(&pc.select(&(0..1000).collect::<Vec<_>>()), 0.1).unwrap();
    let mut big = OccupancyGrid::cube(Vec3::repeat(-0.6), 1.2, 32).unwrap();
    big.add_carve_votes(&pc, 0.1).unwrap();
    for i in 0..big.len() {
        assert!(big.full_votes[i] >= small.full_votes[i]);
        assert!(big.empty_votes[i] >= small.empty_votes[i]);
    }
}

#[test]
fn carved_sphere_is_solid() {
    let pc = sphere_scan(0.0, 42);
    let g = carve_occupancy(&pc, 64, &CarveParams::default()).unwrap();
    assert_eq!(g.field_at(&Vec3::zeros()), Some(1.0));
    assert!(matches!(g.field_at(&Vec3::repeat(0.9)), None | Some(-1.0)));
    assert_eq!(g.field_at(&Vec3::repeat(0.53)), Some(-1.0));
    assert!(g.field.iter().all(|&f| f == 1.0 || f == -1.0));
}

#[test]
fn carving_exterior_voxels_crossed_by_sightlines_are_empty() {
    let pc = sphere_scan(0.0, 42);
    let g = carve_votes(&pc, 48, None).unwrap();
    let mut f = g.clone();
    f.finalize();
    let diag = g.voxel_size * 3f64.sqrt();
    for i in 0..g.len() {
        let c = g.center_of(i);
        if c.norm() > 0.5 + diag && g.empty_votes[i] > 0 {
            assert_eq!(f.field[i], -1.0, "{c:?}");
        }
    }
}

#[test]
fn density_examples() {
    let pc = ScannedPointCloud::new(vec![Vec3::zeros(), Vec3::repeat(1.0)], vec![Vec3::repeat(5.0); 2], None).unwrap();
    let g = density_occupancy(&pc, 32, Some(0.1)).unwrap();
    for i in 0..g.len() {
        let c = g.center_of(i);
        let near = c.norm() < 0.1 || (c - Vec3::repeat(1.0)).norm() < 0.1;
        assert_eq!(g.field[i] > 0.0, near);
    }
    assert!(density_occupancy(&pc, 32, Some(0.0)).is_err());
    let g = density_occupancy(&sphere_scan(0.005, 1), 64, None).unwrap();
    assert_eq!(g.field_at(&Vec3::zeros()), Some(-1.0));
}

#[test]
fn empty_cloud_is_an_error() {
    let pc = ScannedPointCloud::new(vec![], vec![], None).unwrap();
    assert!(matches!(carve_occupancy(&pc, 16, &CarveParams::default()), Err(VizError::EmptyCloud)));
    assert!(matches!(density_occupancy(&pc, 16, Some(0.1)), Err(VizError::EmptyCloud)));
}

#[test]
fn analytic_sphere_extraction() {
    let g = OccupancyGrid::from_fn(Vec3::repeat(-0.5), 1.0, 64, |p| 0.4 - p.norm()).unwrap();
    let m = marching_cubes(&g, 0.0).unwrap();
    assert!(m.is_watertight());
    assert_eq!(m.euler_characteristic(), 2);
    let err: f64 = m.vertices().iter().map(|v| (v.norm() - 0.4).abs()).sum::<f64>() / m.vertices().len() as f64;
    assert!(err < g.voxel_size, "{err}");
    assert!(m.volume() > 0.0);
}

#[test]
fn uniform_field_gives_empty_mesh() {
    let g = OccupancyGrid::from_fn(Vec3::zeros(), 1.0, 8, |_| 1.0).unwrap();
    assert!(marching_cubes(&g, 0.0).unwrap().is_empty());
}

#[test]
fn single_voxel_is_a_closed_component() {
    let g = OccupancyGrid::from_fn(Vec3::zeros(), 1.0, 8, |p| {
        if (p - Vec3::repeat(0.5625)).norm() < 1e-9 {
            1.0
        } else {
            -1.0
        }
    })
    .unwrap();
    let m = marching_cubes(&g, 0.0).unwrap();
    assert!(!m.is_empty());
    assert!(m.is_watertight());
    assert!(m.volume() > 0.0);
}

#[test]
fn pipeline_is_deterministic() {
    let pc = sphere_scan(0.005, 9);
    for method in Method::ALL {
        let (a, ra) = reconstruct_pipeline(&pc, method, 32, None).unwrap();
        let (b, rb) = reconstruct_pipeline(&pc, method, 32, None).unwrap();
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.triangles(), b.triangles());
        assert_eq!(ra.voxels_full, rb.voxels_full);
    }
}
