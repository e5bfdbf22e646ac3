use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use viziscan::augment::parse_augmented;
use viziscan::cli::manifest::{manifest_path, read_json, RunManifest};
use viziscan::cli::SummaryRow;
use viziscan::mesh::primitives::{icosphere, square};
use viziscan::mesh::save_mesh;
use viziscan::scanner::load_cloud;

const BIN: &str = env!("CARGO_BIN_EXE_viziscan");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .env_remove("VIZISCAN_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn sphere_file(dir: &Path) -> PathBuf {
    let p = dir.join("sphere.ply");
    save_mesh(&icosphere(0.5, 3), &p).unwrap();
    p
}

#[test]
fn scan_defaults_write_three_thousand_points_with_sensors() {
    let dir = tempfile::tempdir().unwrap();
    sphere_file(dir.path());
    ok(dir.path(), &["scan", "--mesh", "sphere.ply", "--seed", "1", "--out", "s.ply"]);
    let text = fs::read(dir.path().join("s.ply")).unwrap();
    let header = String::from_utf8_lossy(&text[..400]);
    assert!(header.contains("element vertex 3000"));
    assert!(header.contains("property float sx"));
    let pc = load_cloud(&dir.path().join("s.ply")).unwrap();
    assert_eq!(pc.len(), 3000);
    assert_eq!(pc.seed, Some(1));
    let m: RunManifest = read_json(&manifest_path(&dir.path().join("s.ply"))).unwrap();
    assert_eq!(m.command, "scan");
    assert_eq!(m.seed, Some(1));
    assert_eq!(m.inputs.len(), 1);
    assert_eq!(m.inputs[0].sha256.len(), 64);
}

#[test]
fn hemisphere_sensors_are_above_the_center() {
    let dir = tempfile::tempdir().unwrap();
    sphere_file(dir.path());
    ok(
        dir.path(),
        &["scan", "--mesh", "sphere.ply", "--hemisphere", "--n-points", "300", "--seed", "4", "--out", "h.ply"],
    );
    let m: RunManifest = read_json(&manifest_path(&dir.path().join("h.ply"))).unwrap();
    let sensors = m.details["sensors"].as_array().unwrap();
    assert_eq!(sensors.len(), 10);
    for s in sensors {
        assert!(s[2].as_f64().unwrap() >= 0.0);
    }
    let pc = load_cloud(&dir.path().join("h.ply")).unwrap();
    assert!(pc.sensors.iter().all(|s| s.z >= 0.0));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["scan", "--out", "x.ply"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["reconstruct", "--in", "x.ply", "--res", "4", "--out", "r.ply"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(dir.path(), &["augment", "--in", "x.ply", "--mode", "nope", "--out", "a.ply"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["scan", "--mesh", "missing.ply", "--seed", "0", "--out", "x.ply"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn augment_modes_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    sphere_file(dir.path());
    ok(dir.path(), &["scan", "--mesh", "sphere.ply", "--seed", "2", "--out", "s.ply"]);

    ok(dir.path(), &["augment", "--in", "s.ply", "--mode", "svap", "--out", "svap.ply"]);
    let aug = parse_augmented(&fs::read(dir.path().join("svap.ply")).unwrap()).unwrap();
    assert_eq!((aug.len(), aug.width), (9000, 8));

    ok(dir.path(), &["augment", "--in", "s.ply", "--mode", "sv", "--out", "sv.ply"]);
    let aug = parse_augmented(&fs::read(dir.path().join("sv.ply")).unwrap()).unwrap();
    assert_eq!((aug.len(), aug.width), (3000, 6));
    for i in 0..aug.len() {
        // float32 storage limits the norm to single precision
        assert!((aug.sightline(i).unwrap().norm() - 1.0).abs() < 1e-6);
    }

    ok(dir.path(), &["augment", "--in", "s.ply", "--mode", "ap", "--ap-dist-mult", "0.5", "--out", "ap.ply"]);
    let sidecar: serde_json::Value = read_json(&dir.path().join("ap.json")).unwrap();
    assert_eq!(sidecar["multiplier"], 0.5);
    assert_eq!(sidecar["mode"], "AP");
    assert_eq!(sidecar["rows"], 9000);
    assert!(sidecar["d"].as_f64().unwrap() > 0.0);

    ok(dir.path(), &["augment", "--in", "s.ply", "--mode", "normals", "--normals", "mst", "--out", "n.ply"]);
    let aug = parse_augmented(&fs::read(dir.path().join("n.ply")).unwrap()).unwrap();
    assert_eq!(aug.width, 6);
}

#[test]
fn eval_of_open_prediction_reports_null_iou() {
    let dir = tempfile::tempdir().unwrap();
    sphere_file(dir.path());
    save_mesh(&square(0.0), &dir.path().join("open.ply")).unwrap();
    ok(
        dir.path(),
        &["eval", "--gt", "sphere.ply", "--pred", "open.ply", "--samples", "2000", "--out", "e.json"],
    );
    let report: serde_json::Value = read_json(&dir.path().join("e.json")).unwrap();
    assert!(report["iou"].is_null());
    assert_eq!(report["pred_watertight"], false);
    assert!(report["chamfer_x100"].as_f64().unwrap() > 0.0);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    sphere_file(dir.path());
    let scan = |out: &str| ["scan", "--mesh", "sphere.ply", "--n-points", "800", "--seed", "9", "--out", out].map(String::from);
    ok(dir.path(), &scan("a.ply").each_ref().map(String::as_str));
    ok(dir.path(), &scan("b.ply").each_ref().map(String::as_str));
    let out = Command::new(BIN)
        .current_dir(dir.path())
        .args(scan("c.ply"))
        .env("VIZISCAN_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let a = fs::read(dir.path().join("a.ply")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.ply")).unwrap());
    assert_eq!(a, fs::read(dir.path().join("c.ply")).unwrap());

    for out in ["r1.ply", "r2.ply"] {
        ok(dir.path(), &["reconstruct", "--in", "a.ply", "--res", "32", "--out", out]);
    }
    assert_eq!(
        fs::read(dir.path().join("r1.ply")).unwrap(),
        fs::read(dir.path().join("r2.ply")).unwrap()
    );

    // manifests differ only in the isolated timing object and output names
    let mut m1: RunManifest = read_json(&manifest_path(&dir.path().join("a.ply"))).unwrap();
    let mut m2: RunManifest = read_json(&manifest_path(&dir.path().join("b.ply"))).unwrap();
    m2.timing = m1.timing.clone();
    m2.outputs = m1.outputs.clone();
    m2.params["out"] = m1.params["out"].clone();
    m1.params["out"] = m2.params["out"].clone();
    assert_eq!(m1, m2);
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    sphere_file(dir.path());
    let out = Command::new(BIN)
        .current_dir(dir.path())
        .args(["scan", "--mesh", "sphere.ply", "--seed", "0", "--out", "x.ply"])
        .env("VIZISCAN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn omitted_seed_is_drawn_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    sphere_file(dir.path());
    ok(dir.path(), &["scan", "--mesh", "sphere.ply", "--n-points", "200", "--out", "a.ply"]);
    let m: RunManifest = read_json(&manifest_path(&dir.path().join("a.ply"))).unwrap();
    let seed = m.seed.expect("seed recorded").to_string();
    assert_eq!(m.params["seed"].as_u64().unwrap().to_string(), seed);
    ok(dir.path(), &["scan", "--mesh", "sphere.ply", "--n-points", "200", "--seed", &seed, "--out", "b.ply"]);
    assert_eq!(
        fs::read(dir.path().join("a.ply")).unwrap(),
        fs::read(dir.path().join("b.ply")).unwrap()
    );
}

#[test]
fn pipeline_over_reference_shapes() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["shapes", "--out", "shapes"]);
    ok(
        dir.path(),
        &[
            "pipeline", "--meshes", "shapes", "--out", "run", "--seed", "3", "--jobs", "2", "--n-points", "800",
            "--res", "32", "--samples", "4000",
        ],
    );
    let mut reader = csv::Reader::from_path(dir.path().join("run/summary.csv")).unwrap();
    let rows: Vec<SummaryRow> = reader.deserialize().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    let names: Vec<(&str, String)> = rows.iter().map(|r| (r.mesh.as_str(), r.method.to_string())).collect();
    assert_eq!(
        names,
        [
            ("box", "carve".to_string()),
            ("box", "density".to_string()),
            ("cup", "carve".to_string()),
            ("cup", "density".to_string()),
            ("sphere", "carve".to_string()),
            ("sphere", "density".to_string()),
        ]
    );
    assert!(rows.iter().all(|r| r.error.is_empty() && r.chamfer_x100.is_some()));
    let m: RunManifest = read_json(&manifest_path(&dir.path().join("run/summary.csv"))).unwrap();
    assert_eq!(m.inputs.len(), 3);

    // intermediates feed the standalone commands
    ok(dir.path(), &["reconstruct", "--in", "run/sphere/scan.ply", "--res", "16", "--out", "again.ply"]);
    ok(dir.path(), &["augment", "--in", "run/box/scan.ply", "--mode", "raw", "--out", "raw.ply"]);
    ok(
        dir.path(),
        &["eval", "--gt", "shapes/cup.ply", "--pred", "run/cup/carve.ply", "--samples", "1000", "--out", "e.json"],
    );
}
