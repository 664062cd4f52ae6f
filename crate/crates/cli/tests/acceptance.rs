//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.
//!
//! Heavy: two 6000-iteration trainings run here. Build with the test profile
//! (optimized) and expect several minutes on one core.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use gripsdf::data::{default_sample_bounds, generate_grasp_scene, penetration_scene, sample_points, scene_seed, SceneSpec};
use gripsdf::encoding::{articulation_embed, EncoderConfig};
use gripsdf::field::{AnalyticSdf, NeuralSdf, Primitive, PrimitiveKind, SdfField};
use gripsdf::kinematics::{pose_jitter, HandModel, HandPose, RigidTransform, ARTICULATION_DIM, NUM_FRAMES};
use gripsdf::mesh::{cube_mesh, marching_cubes, reconstruct};
use gripsdf::metrics::{chamfer_distance, compare_meshes, end_point_error, f_score, intersection_volume, MetricOptions};
use gripsdf::neural::{
    mean_abs_error, mlp_backward, mlp_forward, stencil_loss, stencil_points, Activation, Conditioning, Mlp, MlpConfig,
    NetworkConfig, SdfNetwork, TrainConfig, Trainer, TrainingScene,
};
use gripsdf::par::Execution;
use gripsdf::refine::{refine_pose, RefineConfig};
use gripsdf::{Aabb, Vec3};
use gripsdf_cli::{pose_penalty, PipelineConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Ledger {
    failed: Vec<u32>,
    /// `ACCEPTANCE_ONLY=5,8` restricts the run to the listed criteria.
    only: Option<Vec<u32>>,
}

impl Ledger {
    fn wants(&self, id: u32) -> bool {
        self.only.as_ref().is_none_or(|o| o.contains(&id))
    }

    fn check(&mut self, id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) {
        if !self.wants(id) {
            println!("criterion {id:>2}: SKIP {name}");
            return;
        }
        let t = Instant::now();
        let o = f();
        let elapsed = t.elapsed();
        let pass = o.pass && elapsed < budget;
        println!(
            "criterion {id:>2}: {} {name}: {} [{:.1}s / budget {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
        if !pass {
            self.failed.push(id);
        }
    }
}

fn random_articulation(rng: &mut ChaCha8Rng, scale: f64) -> [f64; ARTICULATION_DIM] {
    std::array::from_fn(|_| rng.random_range(-scale..scale))
}

fn random_vec(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

fn kinematics_correctness() -> Outcome {
    let model = HandModel::default_adult();
    let sk = model.skeleton();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut comp_err, mut ortho_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..10_000 {
        let a = random_articulation(&mut rng, 1.5);
        let placed = sk.placements(&a).unwrap();
        for j in 1..NUM_FRAMES {
            let w = Vec3::new(a[3 * (j - 1)], a[3 * (j - 1) + 1], a[3 * (j - 1) + 2]);
            let local = RigidTransform::from_axis_angle(&w, *sk.offset(j));
            let composed = placed[sk.parent(j).unwrap()].compose(&local);
            comp_err = comp_err
                .max((composed.rotation - placed[j].rotation).amax())
                .max((composed.translation - placed[j].translation).amax());
            let r = &placed[j].rotation;
            ortho_err = ortho_err.max((r.transpose() * r - gripsdf::Mat3::identity()).amax()).max((r.determinant() - 1.0).abs());
        }
    }
    // Articulation-chain Jacobian against central differences.
    let mut jac_err: f64 = 0.0;
    let h = 1e-6;
    for _ in 0..200 {
        let a = random_articulation(&mut rng, 1.0);
        let frame = rng.random_range(1..NUM_FRAMES);
        let local = random_vec(&mut rng, 20.0);
        let posed = sk.pose(&a).unwrap();
        let world = posed.placements()[frame].apply(&local);
        let cols = posed.point_jacobian(frame, &world);
        for (k, col) in cols.iter().enumerate() {
            let (mut ap, mut am) = (a, a);
            ap[k] += h;
            am[k] -= h;
            let fd = (sk.placements(&ap).unwrap()[frame].apply(&local) - sk.placements(&am).unwrap()[frame].apply(&local)) / (2.0 * h);
            let rel = (fd - col).norm() / fd.norm().max(col.norm()).max(1e-3);
            jac_err = jac_err.max(rel);
        }
    }
    outcome(
        comp_err < 1e-9 && ortho_err < 1e-6 && jac_err < 1e-3,
        format!("composition {comp_err:.2e} (<1e-9), orthonormality {ortho_err:.2e} (<1e-6), jacobian rel {jac_err:.2e} (<1e-3)"),
    )
}

fn encoding_invariance() -> Outcome {
    let model = HandModel::default_adult();
    let cfg = EncoderConfig::default();
    let net = SdfNetwork::new(NetworkConfig::default()).unwrap();
    let layout = net.layout();
    let base = generate_grasp_scene(PrimitiveKind::Sphere, 11).unwrap();
    let ctx = base.context(&net.config().pyramid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut global_ok, mut local_ok) = (true, true);
    for _ in 0..1000 {
        let a = random_articulation(&mut rng, 1.2);
        let x = random_vec(&mut rng, 150.0);
        // Global pose change: same articulation, different wrist placement.
        let mut c1 = ctx.clone();
        c1.pose = HandPose { articulation: a, global_rotation: random_vec(&mut rng, 1.0), global_translation: random_vec(&mut rng, 50.0) };
        let mut c2 = c1.clone();
        c2.pose.global_rotation = random_vec(&mut rng, 1.0);
        c2.pose.global_translation = random_vec(&mut rng, 50.0);
        let (p1, p2) = (net.prepare(&c1).unwrap(), net.prepare(&c2).unwrap());
        let (e1, e2) = (net.encode_batch(&p1, &[x]), net.encode_batch(&p2, &[x]));
        global_ok &= e1[layout.conditioning.clone()] == e2[layout.conditioning.clone()];
        let k = layout.conditioning_scale();
        let scaled: Vec<f64> = articulation_embed(&model, &a, &x, &cfg).unwrap().iter().map(|v| v * k).collect();
        global_ok &= scaled[..] == e1[layout.conditioning.clone()];

        // Subtree locality: rotating joint j leaves every frame outside its subtree untouched.
        let j = rng.random_range(1..NUM_FRAMES);
        let mut b = a;
        for k in 0..3 {
            b[3 * (j - 1) + k] += rng.random_range(-0.5..0.5);
        }
        let (ea, eb) = (articulation_embed(&model, &a, &x, &cfg).unwrap(), articulation_embed(&model, &b, &x, &cfg).unwrap());
        let w = 3 * cfg.width_per_scalar();
        for f in 1..NUM_FRAMES {
            if !model.skeleton().is_ancestor_or_self(j, f) {
                local_ok &= ea[(f - 1) * w..f * w] == eb[(f - 1) * w..f * w];
            }
        }
    }
    outcome(global_ok && local_ok, format!("global-pose bit invariance {global_ok}, untouched blocks bit-equal {local_ok} over 1000 trials"))
}

fn gradient_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let h = 1e-6;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
    for net in 0..20u64 {
        let input_width = rng.random_range(2..12);
        let num_layers = rng.random_range(2..6);
        let cfg = MlpConfig {
            input_width,
            hidden_width: rng.random_range(4..16),
            num_layers,
            skip_layer: (num_layers > 2).then(|| num_layers / 2),
            activation: if net % 2 == 0 { Activation::default() } else { Activation::Softplus { beta: 5.0 } },
        };
        let mut mlp = Mlp::init(cfg, net).unwrap();
        let x: Vec<f64> = (0..input_width).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, cache) = mlp_forward(&mlp, &x).unwrap();
        let g = mlp_backward(&mlp, &cache, 1.0).unwrap();
        for i in 0..input_width {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[i] += h;
            xm[i] -= h;
            let fd = (mlp_forward(&mlp, &xp).unwrap().0 - mlp_forward(&mlp, &xm).unwrap().0) / (2.0 * h);
            worst = worst.max(rel(g.input[i], fd));
        }
        for p in 0..mlp.num_params() {
            let orig = mlp.params()[p];
            mlp.params_mut()[p] = orig + h;
            let fp = mlp_forward(&mlp, &x).unwrap().0;
            mlp.params_mut()[p] = orig - h;
            let fm = mlp_forward(&mlp, &x).unwrap().0;
            mlp.params_mut()[p] = orig;
            worst = worst.max(rel(g.params[p], (fp - fm) / (2.0 * h)));
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} (<1e-4, denominator floor 1e-3) over 20 networks"))
}

fn loss_fidelity() -> Outcome {
    let sphere = AnalyticSdf::sphere(Vec3::zeros(), 50.0).unwrap();
    let cfg = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut data, mut eik): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let dir = random_vec(&mut rng, 1.0).normalize();
        let x = dir * rng.random_range(20.0..150.0);
        let pts = stencil_points(&x, cfg.eikonal_step);
        let values: [f64; 7] = std::array::from_fn(|i| sphere.eval(&pts[i]));
        let t = stencil_loss(&values, sphere.eval(&x), &cfg);
        data = data.max(t.data);
        eik = eik.max(t.eikonal);
    }
    let echo = serde_json::to_string(&PipelineConfig::default()).unwrap();
    let verbatim = echo.contains("\"eikonal_coefficient\":0.1") && echo.contains("\"learning_rate\":0.0001");
    let defaults = cfg.eikonal_coefficient == 0.1 && cfg.learning_rate == 1e-4;
    outcome(
        data == 0.0 && eik < 1e-6 && defaults && verbatim,
        format!("data term {data}, eikonal {eik:.2e} (<1e-6), lambda {} lr {} in default config: {verbatim}", cfg.eikonal_coefficient, cfg.learning_rate),
    )
}

fn reconstruct_f(net: &SdfNetwork, scene: &SceneSpec, ts: &TrainingScene, articulation: Option<&[f64]>, res: usize) -> (f64, f64) {
    let bounds = default_sample_bounds();
    let field = match articulation {
        Some(a) => NeuralSdf::with_articulation(net, &ts.context, a, bounds).unwrap(),
        None => NeuralSdf::new(net, &ts.context, bounds).unwrap(),
    };
    let (mesh, _) = reconstruct(&field, &bounds, [res; 3], Execution::default()).unwrap();
    let r = compare_meshes(&mesh, &scene.object_mesh, &MetricOptions::default()).unwrap();
    (r.f5, r.f10)
}

fn overfit() -> Outcome {
    let iterations = 2000;
    let scene = generate_grasp_scene(PrimitiveKind::Sphere, 0).unwrap();
    let samples = sample_points(&scene, 4096, 10.0, &default_sample_bounds(), 1).unwrap();
    let ncfg = NetworkConfig::default();
    let data = vec![scene.training_scene(&samples, &ncfg.pyramid).unwrap()];
    let mut trainer = Trainer::new(SdfNetwork::new(ncfg).unwrap(), TrainConfig { iterations, ..TrainConfig::default() }).unwrap();
    trainer.run(&data, |_, _| Ok(())).unwrap();
    let mae = mean_abs_error(&trainer.network, &data[0], Execution::default()).unwrap();
    let (f5, _) = reconstruct_f(&trainer.network, &scene, &data[0], None, 96);
    outcome(mae < 2.0 && f5 > 0.8, format!("{iterations} iterations, held-in mean |s - s_hat| {mae:.3} mm (<2), F-5 {f5:.3} (>0.8) at 96^3"))
}

struct TwentyScenes {
    scenes: Vec<SceneSpec>,
    data: Vec<TrainingScene>,
}

const TRAIN_SCENES: usize = 20;
const HELD_OUT: usize = 5;
const GENERAL_RES: usize = 48;

fn twenty_scenes() -> TwentyScenes {
    let kinds = [PrimitiveKind::Sphere, PrimitiveKind::Box, PrimitiveKind::Capsule];
    let pyramid = NetworkConfig::default().pyramid;
    let mut scenes = Vec::new();
    let mut data = Vec::new();
    for i in 0..(TRAIN_SCENES + HELD_OUT) as u64 {
        let scene = generate_grasp_scene(kinds[i as usize % 3], scene_seed(7, i)).unwrap();
        let samples = sample_points(&scene, 4096, 10.0, &default_sample_bounds(), i).unwrap();
        data.push(scene.training_scene(&samples, &pyramid).unwrap());
        scenes.push(scene);
    }
    TwentyScenes { scenes, data }
}

fn general_train_config() -> TrainConfig {
    TrainConfig { iterations: 6000, articulation_jitter: 0.3, ..TrainConfig::default() }
}

fn train_on(set: &TwentyScenes, conditioning: Conditioning) -> SdfNetwork {
    let ncfg = NetworkConfig { conditioning, ..NetworkConfig::default() };
    let mut trainer = Trainer::new(SdfNetwork::new(ncfg).unwrap(), general_train_config()).unwrap();
    trainer.run(&set.data[..TRAIN_SCENES], |_, _| Ok(())).unwrap();
    trainer.network
}

fn generalization(set: &TwentyScenes, net: &SdfNetwork) -> Outcome {
    let mut f10s = Vec::new();
    for i in TRAIN_SCENES..TRAIN_SCENES + HELD_OUT {
        f10s.push(reconstruct_f(net, &set.scenes[i], &set.data[i], None, GENERAL_RES).1);
    }
    let mean = f10s.iter().sum::<f64>() / f10s.len() as f64;
    outcome(mean > 0.6, format!("held-out F-10 {:?}, mean {mean:.3} (>0.6)", f10s.iter().map(|f| (f * 1000.0).round() / 1000.0).collect::<Vec<_>>()))
}

fn ablation(set: &TwentyScenes, articulated: &SdfNetwork) -> Outcome {
    let baseline = train_on(set, Conditioning::PoseParameters);
    let mean_f5 = |net: &SdfNetwork| {
        let mut sum = 0.0;
        for i in TRAIN_SCENES..TRAIN_SCENES + HELD_OUT {
            let jittered = pose_jitter(&set.data[i].context.pose, 0.1, 1000 + i as u64);
            sum += reconstruct_f(net, &set.scenes[i], &set.data[i], Some(&jittered.articulation), GENERAL_RES).0;
        }
        sum / HELD_OUT as f64
    };
    let (a, b) = (mean_f5(articulated), mean_f5(&baseline));
    outcome(a >= b, format!("jittered (sigma 0.1) held-out F-5: articulation {a:.3} vs pose parameters {b:.3}"))
}

fn refinement() -> Outcome {
    let (scene, touching) = penetration_scene(5.0).unwrap();
    let cfg = RefineConfig::default();
    let (refined, report) = refine_pose(&scene.object, &scene.model, &scene.hand_pose, &cfg).unwrap();
    let per_bone = cfg.hand_samples_per_bone;
    let p0 = pose_penalty(&scene.object, &scene.model, &scene.hand_pose, per_bone).unwrap();
    let p1 = pose_penalty(&scene.object, &scene.model, &refined, per_bone).unwrap();
    let reduction = 1.0 - p1 / p0;
    let contact_end = *report.contact.last().unwrap();
    let e0 = end_point_error(&scene.hand_pose, &touching, &scene.model).unwrap();
    let e1 = end_point_error(&refined, &touching, &scene.model).unwrap();
    let pass = report.total.len() <= 200 && reduction >= 0.8 && contact_end <= report.initial.contact && e1 <= e0 + 1.0;
    outcome(
        pass,
        format!(
            "penalty {p0:.3} -> {p1:.3} ({:.1}% reduction, >=80%), contact {:.3} -> {contact_end:.3}, EPE {e0:.3} -> {e1:.3} mm (+<=1)",
            100.0 * reduction,
            report.initial.contact
        ),
    )
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut exact = true;
    for (na, nb) in [(1, 1), (17, 400), (1500, 2000)] {
        let a: Vec<Vec3> = (0..na).map(|_| random_vec(&mut rng, 50.0)).collect();
        let b: Vec<Vec3> = (0..nb).map(|_| random_vec(&mut rng, 50.0)).collect();
        let nn = |from: &[Vec3], to: &[Vec3]| -> Vec<f64> {
            from.iter().map(|p| to.iter().map(|q| (q - p).norm_squared()).fold(f64::INFINITY, f64::min)).collect()
        };
        let (ab, ba) = (nn(&a, &b), nn(&b, &a));
        let brute_cd = ab.iter().sum::<f64>() / na as f64 + ba.iter().sum::<f64>() / nb as f64;
        exact &= chamfer_distance(&a, &b).unwrap() == brute_cd;
        for t in [5.0, 10.0, 20.0] {
            let p = ab.iter().filter(|d| **d <= t * t).count() as f64 / na as f64;
            let r = ba.iter().filter(|d| **d <= t * t).count() as f64 / nb as f64;
            let brute_f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            exact &= f_score(&a, &b, t).unwrap() == brute_f;
        }
    }
    let cube = cube_mesh(Vec3::zeros(), 10.0);
    let vol = intersection_volume(&cube, &cube, 0.25).unwrap().volume_cm3;
    let pts = cube.sample_surface(2000, 1);
    let self_f = f_score(&pts, &pts, 5.0).unwrap();
    outcome(
        exact && (vol - 8.0).abs() <= 0.16 && self_f == 1.0,
        format!("brute-force chamfer/F exact {exact}, identical cubes {vol:.4} cm^3 (8 +-2%), f_score(a,a) {self_f}"),
    )
}

fn mesh_extraction() -> Outcome {
    let sphere = AnalyticSdf::sphere(Vec3::zeros(), 50.0).unwrap();
    let bounds = Aabb::cube(60.0);
    let res = 64;
    let mesh = marching_cubes(&sphere, &bounds, [res; 3]).unwrap();
    let cell = 120.0 / (res - 1) as f64;
    let half_diag = 0.5 * cell * 3f64.sqrt();
    let worst = mesh.vertices.iter().map(|v| (v.norm() - 50.0).abs()).fold(0.0, f64::max);
    let prims = [
        Primitive::Sphere { center: Vec3::new(3.0, -2.0, 1.0), radius: 40.0 },
        Primitive::Box { center: Vec3::zeros(), half_extents: Vec3::new(40.0, 25.0, 30.0), rotation: Vec3::new(0.3, -0.2, 0.5) },
        Primitive::Capsule { a: Vec3::new(-30.0, 0.0, 0.0), b: Vec3::new(30.0, 10.0, 5.0), radius: 20.0 },
        Primitive::Cylinder { center: Vec3::zeros(), axis: Vec3::new(0.2, 1.0, 0.1), half_height: 35.0, radius: 25.0 },
    ];
    let mut watertight = Vec::new();
    for p in prims {
        let f = AnalyticSdf::new(p).unwrap();
        let m = marching_cubes(&f, &Aabb::cube(70.0), [res; 3]).unwrap();
        watertight.push(!m.is_empty() && m.is_watertight());
    }
    outcome(
        worst <= half_diag && watertight.iter().all(|w| *w),
        format!("max |r - 50| {worst:.3} mm (<= {half_diag:.3}), primitives watertight {watertight:?}"),
    )
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_gripsdf")
}

fn gripsdf(args: &[&str], threads: usize, out: &Path) -> i32 {
    let status = Command::new(bin())
        .args(args)
        .args(["--threads", &threads.to_string(), "--out"])
        .arg(out)
        .env("RUST_LOG", "error")
        .status()
        .unwrap();
    status.code().unwrap_or(-1)
}

fn tree_bytes(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let cfg = t.join("config.json");
    fs::write(&cfg, r#"{"train": {"iterations": 40, "batch_size": 16}, "refine": {"steps": 20, "grid_resolution": 32}}"#).unwrap();
    let cfg = s(&cfg);
    // Inputs shared by both reruns come from the first run of the previous stage.
    let data = t.join("data_1");
    let pen = t.join("pen_1");
    let ckpt = t.join("train_1").join("checkpoint.nsdf");
    type Stage = (&'static str, Vec<String>, i32);
    let stages: Vec<Stage> = vec![
        ("data", vec!["gen-data".into(), "--count".into(), "3".into(), "--samples".into(), "256".into()], 0),
        ("pen", vec!["gen-data".into(), "--penetration".into(), "5".into(), "--samples".into(), "64".into()], 0),
        ("train", vec!["train".into(), "--dataset".into(), s(&data)], 0),
        (
            "recon",
            vec!["reconstruct".into(), "--checkpoint".into(), s(&ckpt), "--scene".into(), s(&data.join("scene_00000")), "--resolution".into(), "24".into()],
            -2,
        ),
        ("refine", vec!["refine".into(), "--scene".into(), s(&pen.join("scene_00000"))], 0),
        (
            "eval",
            vec![
                "eval".into(),
                "--pred".into(),
                s(&data.join("scene_00001").join("object.obj")),
                "--gt".into(),
                s(&data.join("scene_00000")),
                "--hand".into(),
                s(&data.join("scene_00000").join("hand.json")),
            ],
            0,
        ),
        ("export", vec!["export".into(), "--input".into(), s(&pen.join("scene_00000").join("object.obj")), "--output".into(), "object.ply".into()], 0),
    ];
    let mut failures = Vec::new();
    for (name, args, expect) in &stages {
        let mut all: Vec<&str> = vec!["--config", &cfg, "--seed", "5"];
        all.extend(args.iter().map(|a| a.as_str()));
        let (o1, o2) = (t.join(format!("{name}_1")), t.join(format!("{name}_2")));
        let (c1, c2) = (gripsdf(&all, 1, &o1), gripsdf(&all, 2, &o2));
        // Reconstruction of a barely trained field may legitimately warn (exit 1).
        let code_ok = if *expect == -2 { c1 == c2 && (c1 == 0 || c1 == 1) } else { c1 == *expect && c2 == *expect };
        let (t1, t2) = (tree_bytes(&o1), tree_bytes(&o2));
        if !code_ok || t1.is_empty() || t1 != t2 {
            failures.push(format!("{name} (exit {c1}/{c2})"));
        }
    }
    outcome(failures.is_empty(), if failures.is_empty() { "6 commands byte-identical across --threads 1/2".to_string() } else { format!("differing: {failures:?}") })
}

#[test]
fn acceptance() {
    let only = std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|s| s.trim().parse().ok()).collect());
    let mut ledger = Ledger { failed: Vec::new(), only };
    let min = |m: u64| Duration::from_secs(60 * m);
    ledger.check(1, "kinematics", Duration::from_secs(10), kinematics_correctness);
    ledger.check(2, "encoding invariance", Duration::from_secs(5), encoding_invariance);
    ledger.check(3, "neural gradients", Duration::from_secs(30), gradient_suite);
    ledger.check(4, "loss fidelity", Duration::from_secs(30), loss_fidelity);
    ledger.check(5, "desk-scale overfit", min(10), overfit);
    if ledger.wants(6) || ledger.wants(7) {
        let t = Instant::now();
        let set = twenty_scenes();
        let articulated = train_on(&set, Conditioning::Articulation);
        let shared = t.elapsed();
        println!("(20-scene data and articulation-conditioned training: {:.1}s, counted in criteria 6 and 7)", shared.as_secs_f64());
        ledger.check(6, "generalization", min(30).saturating_sub(shared), || generalization(&set, &articulated));
        ledger.check(7, "ablation direction", min(60).saturating_sub(shared), || ablation(&set, &articulated));
    }
    ledger.check(8, "refinement", min(1), refinement);
    ledger.check(9, "metric oracles", min(5), metric_oracles);
    ledger.check(10, "mesh extraction", min(5), mesh_extraction);
    ledger.check(11, "cli determinism", min(10), cli_determinism);
    assert!(ledger.failed.is_empty(), "failed criteria: {:?}", ledger.failed);
}
