use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gripsdf::data::{read_scene, DatasetManifest};
use gripsdf::field::PrimitiveKind;
use gripsdf::mesh::read_mesh;
use gripsdf::neural::{Checkpoint, NetworkConfig, SdfNetwork};
use gripsdf_cli::{to_camera_frame, EXIT_INVALID, EXIT_IO, EXIT_WARNING};

fn run(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_gripsdf")).args(args).env("RUST_LOG", "error").output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn dataset(root: &Path, extra: &[&str]) -> PathBuf {
    let out = root.join("data");
    let mut args = vec!["gen-data", "--samples", "128", "--out", p(&out)];
    args.extend_from_slice(extra);
    let (code, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn gen_data_counts_and_filters_kinds() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dataset(tmp.path(), &["--count", "5", "--kinds", "sphere"]);
    let manifest = DatasetManifest::load(&out).unwrap();
    assert_eq!(manifest.scenes.len(), 5);
    assert!(manifest.scenes.iter().all(|s| s.kind == PrimitiveKind::Sphere));
    for s in &manifest.scenes {
        assert!(out.join(&s.dir).join("samples.bin").is_file());
    }
    assert_eq!(manifest.config["dataset"]["count"], 5);
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    assert_eq!(run(&["gen-data", "--kinds", "torus", "--out", p(t)]).0, EXIT_INVALID);
    assert_eq!(run(&["train", "--dataset", p(&t.join("missing")), "--out", p(t)]).0, EXIT_INVALID);
    assert_eq!(run(&["--config", p(&t.join("none.json")), "eval", "--pred", "a.obj", "--gt", "b.obj"]).0, EXIT_IO);
    fs::write(t.join("bad.obj"), "v 0 0 0\nf 1 2 3\n").unwrap();
    let bad = t.join("bad.obj");
    assert_eq!(run(&["eval", "--pred", p(&bad), "--gt", p(&bad), "--out", p(t)]).0, EXIT_INVALID);
    assert_eq!(run(&["frobnicate"]).0, EXIT_INVALID);
}

#[test]
fn eval_identical_meshes_scores_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), &["--count", "1"]);
    let mesh = data.join("scene_00000").join("object.obj");
    let out = tmp.path().join("eval");
    let (code, err) = run(&["eval", "--pred", p(&mesh), "--gt", p(&mesh), "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    let m = json(&out.join("metrics.json"));
    assert_eq!(m["metrics"]["f5"], 1.0);
    assert_eq!(m["metrics"]["f10"], 1.0);
    // Both sides are sampled independently, so only the sampling gap remains.
    assert!(m["metrics"]["chamfer"].as_f64().unwrap() < 2.0);
    assert_eq!(m["config"]["num_points"], 10000);
}

#[test]
fn export_round_trip_preserves_vertices() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), &["--count", "1"]);
    let src = data.join("scene_00000").join("object.obj");
    let out = tmp.path().join("x");
    assert_eq!(run(&["export", "--input", p(&src), "--output", "m.ply", "--out", p(&out)]).0, 0);
    assert_eq!(run(&["export", "--input", p(&out.join("m.ply")), "--output", "m.obj", "--out", p(&out)]).0, 0);
    let (a, b) = (read_mesh(&src).unwrap(), read_mesh(&out.join("m.obj")).unwrap());
    assert_eq!(a.triangles, b.triangles);
    for (u, v) in a.vertices.iter().zip(&b.vertices) {
        assert_eq!(u.map(|c| c as f32), v.map(|c| c as f32));
    }
    assert_eq!(run(&["export", "--input", p(&src), "--output", "../escape.obj", "--out", p(&out)]).0, EXIT_INVALID);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn resume_matches_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = dataset(t, &["--count", "2"]);
    let cfg = write_config(t, r#"{"train": {"iterations": 30, "batch_size": 8, "checkpoint_every": 15}}"#);
    let full = t.join("full");
    let (code, err) = run(&["--config", p(&cfg), "train", "--dataset", p(&data), "--out", p(&full)]);
    assert_eq!(code, 0, "{err}");
    let mid = full.join("checkpoint_000015.nsdf");
    assert!(mid.is_file());
    let resumed = t.join("resumed");
    let (code, err) = run(&["--config", p(&cfg), "train", "--dataset", p(&data), "--resume", p(&mid), "--out", p(&resumed)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read(full.join("checkpoint.nsdf")).unwrap(), fs::read(resumed.join("checkpoint.nsdf")).unwrap());

    let log = fs::read_to_string(full.join("loss.csv")).unwrap();
    assert_eq!(log.lines().next().unwrap(), "iteration,loss,data_term,eikonal_term");
    assert_eq!(log.lines().count(), 31);
}

#[test]
fn zero_eikonal_coefficient_logs_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = dataset(t, &["--count", "1"]);
    let cfg = write_config(t, r#"{"train": {"iterations": 5, "batch_size": 4, "eikonal_coefficient": 0.0}}"#);
    let out = t.join("train");
    assert_eq!(run(&["--config", p(&cfg), "train", "--dataset", p(&data), "--out", p(&out)]).0, 0);
    let log = fs::read_to_string(out.join("loss.csv")).unwrap();
    for line in log.lines().skip(1) {
        assert_eq!(line.rsplit(',').next().unwrap(), "0");
    }
}

#[test]
fn untrained_positive_field_warns_with_empty_mesh() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = dataset(t, &["--count", "1"]);
    let net = SdfNetwork::new(NetworkConfig::default()).unwrap();
    let mut params = vec![0.0; net.num_params()];
    // Output bias: the last decoder parameter. Every query then reads +100 mm.
    params[net.mlp().num_params() - 1] = 1.0;
    let net = SdfNetwork::from_params(NetworkConfig::default(), &params).unwrap();
    let ckpt = t.join("flat.nsdf");
    Checkpoint::new(net, None, 0, None).save(&ckpt).unwrap();
    let out = t.join("recon");
    let scene = data.join("scene_00000");
    let (code, _) = run(&["reconstruct", "--checkpoint", p(&ckpt), "--scene", p(&scene), "--resolution", "8", "--out", p(&out)]);
    assert_eq!(code, EXIT_WARNING);
    assert!(read_mesh(&out.join("mesh.obj")).unwrap().is_empty());
    assert_eq!(json(&out.join("reconstruct.json"))["triangles"], 0);
}

#[test]
fn checkpoint_scene_mismatch_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = dataset(t, &["--count", "1"]);
    let cfg = NetworkConfig { image_channels: 3, ..NetworkConfig::default() };
    let ckpt = t.join("rgb.nsdf");
    Checkpoint::new(SdfNetwork::new(cfg).unwrap(), None, 0, None).save(&ckpt).unwrap();
    let scene = data.join("scene_00000");
    let (code, err) = run(&["reconstruct", "--checkpoint", p(&ckpt), "--scene", p(&scene), "--resolution", "8", "--out", p(t)]);
    assert_eq!(code, EXIT_INVALID);
    assert!(err.contains("header mismatch"), "{err}");
}

#[test]
fn camera_frame_matches_camera_transform() {
    let tmp = tempfile::tempdir().unwrap();
    let data = dataset(tmp.path(), &["--count", "1"]);
    let (scene, _) = read_scene(&data.join("scene_00000")).unwrap();
    let global = scene.hand_pose.global_transform();
    let moved = to_camera_frame(&scene.object_mesh, &global, &scene.camera.depth_offset);
    for (w, c) in scene.object_mesh.vertices.iter().zip(&moved.vertices) {
        assert!((scene.camera.to_camera(&global, w) - c).norm() < 1e-6);
    }
    assert_eq!(moved.triangles, scene.object_mesh.triangles);
}

#[test]
fn refine_on_penetration_scene_reports_reduction() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let data = dataset(t, &["--penetration", "5"]);
    let scene = data.join("scene_00000");
    assert!(scene.join("hand_gt.json").is_file());
    let out = t.join("refine");
    let (code, err) = run(&["refine", "--scene", p(&scene), "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    let r = json(&out.join("refine.json"));
    assert!(r["penalty_reduction"].as_f64().unwrap() >= 0.8);
    assert!(r["final_epe_mm"].as_f64().unwrap() <= r["initial_epe_mm"].as_f64().unwrap() + 1.0);
    assert_eq!(r["config"]["steps"], 200);
    assert!(out.join("hand.json").is_file());
}
