//! The `gripsdf` command-line pipeline.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use gripsdf::data::{
    generate_grasp_scene_with, penetration_scene, read_dataset, read_hand, read_scene, sample_points, scene_dir_name, scene_seed, write_hand,
    write_scene, DatasetManifest, ManifestEntry, SceneFiles, NEAR_SURFACE_PERCENT,
};
use gripsdf::field::{hand_capsules, AnalyticSdf, NeuralSdf, PrimitiveKind, SdfField};
use gripsdf::kinematics::{hand_surface_points, HandModel, HandPose};
use gripsdf::mesh::{export_mesh, marching_cubes, read_mesh, reconstruct, Mesh, MeshFormat};
use gripsdf::metrics::{compare_meshes, end_point_error, intersection_volume, MetricOptions};
use gripsdf::neural::{mean_abs_error, Checkpoint, NetworkConfig, SdfNetwork, TrainConfig, Trainer, TrainingScene};
use gripsdf::par::{map_range, Execution};
use gripsdf::refine::{intersection_penalty, refine_pose, RefineConfig, RefineReport};
use gripsdf::{Aabb, Error, Vec3};

pub const EXIT_OK: i32 = 0;
pub const EXIT_WARNING: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Resolution of the capsule-hand mesh used for intersection volumes (mm).
const HAND_MESH_SPACING: f64 = 1.5;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    /// Finished, but the output is suspect.
    Warning(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Warning(w) => write!(f, "warning: {w}"),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Warning(_) => EXIT_WARNING,
            CliError::Core(Error::Diverged(_)) => EXIT_DIVERGED,
            CliError::Core(Error::Io(_)) => EXIT_IO,
            CliError::Core(_) => EXIT_INVALID,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::InvalidInput(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub count: usize,
    pub kinds: Vec<PrimitiveKind>,
    pub samples_per_scene: usize,
    pub surface_band: f64,
    /// Uniform samples are drawn in the cube `[-h, h]^3` (wrist frame, mm).
    pub sample_box_half: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            count: 20,
            kinds: vec![PrimitiveKind::Sphere, PrimitiveKind::Box, PrimitiveKind::Capsule],
            samples_per_scene: 4096,
            surface_band: 10.0,
            sample_box_half: 150.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Wrist,
    Camera,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructConfig {
    pub resolution: usize,
    /// Extraction cube `[-h, h]^3` in the wrist frame, mm.
    pub bounds_half: f64,
    pub frame: Frame,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self { resolution: 64, bounds_half: 150.0, frame: Frame::Wrist }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Everything a command reads from `--config`. Missing fields take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Root seed; `--seed` overrides it and every seed derived from it.
    pub seed: u64,
    pub paths: PathsConfig,
    pub dataset: DatasetConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub refine: RefineConfig,
    pub reconstruct: ReconstructConfig,
    pub metrics: MetricOptions,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    /// Propagates the root seed into the sub-configs.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.network.seed = seed;
        self.train.seed = seed;
        self.metrics.seed = seed;
        self
    }
}

#[derive(Debug, Parser)]
#[command(name = "gripsdf", version, about = "Hand-conditioned signed-distance reconstruction of grasped objects")]
pub struct Cli {
    /// JSON pipeline configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic grasp dataset.
    GenData(GenDataArgs),
    /// Train the decoder on a dataset.
    Train(TrainArgs),
    /// Extract the object surface of one scene.
    Reconstruct(ReconstructArgs),
    /// Refine the hand articulation of one scene against an object field.
    Refine(RefineArgs),
    /// Compare a predicted mesh with a ground-truth mesh.
    Eval(EvalArgs),
    /// Convert a mesh between OBJ and PLY.
    Export(ExportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub count: Option<usize>,
    /// Comma-separated primitive kinds.
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Write a single flat-hand scene whose index finger penetrates a sphere
    /// by this many mm, with the touching pose in `hand_gt.json`.
    #[arg(long)]
    pub penetration: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Continue from a checkpoint that carries optimizer state.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long)]
    pub iterations: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long, value_enum)]
    pub frame: Option<Frame>,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Use the trained field instead of the scene's analytic object.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// hand.json whose capsule hand is intersected with the prediction.
    #[arg(long)]
    pub hand: Option<PathBuf>,
    /// Two hand.json files (predicted, reference) for the end-point error.
    #[arg(long, num_args = 2, value_names = ["PRED", "GT"])]
    pub epe: Option<Vec<PathBuf>>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file name under `--out`; its extension picks the format.
    #[arg(long)]
    pub output: String,
}

/// Parses `args` and runs the command.
pub fn run_from<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) {
            print!("{e}");
            std::process::exit(EXIT_OK);
        }
        invalid(e.to_string())
    })?;
    run(cli)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = cli.out.clone();
    let body = |cfg: PipelineConfig| match cli.command {
        Command::GenData(a) => gen_data(cfg, a, &out),
        Command::Train(a) => train(cfg, a, &out),
        Command::Reconstruct(a) => cmd_reconstruct(cfg, a, &out),
        Command::Refine(a) => refine(cfg, a, &out),
        Command::Eval(a) => eval(cfg, a, &out),
        Command::Export(a) => export(a, &out),
    };
    match cli.threads {
        Some(n) => {
            if n == 0 {
                return Err(invalid("--threads must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| invalid(format!("cannot build thread pool: {e}")))?;
            pool.install(|| body(cfg))
        }
        None => body(cfg),
    }
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if !path.is_file() {
        return Err(invalid(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if !path.is_dir() {
        return Err(invalid(format!("{what} {} is not a directory", path.display())));
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

fn parse_kind(s: &str) -> CliResult<PrimitiveKind> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_ascii_lowercase()))
        .map_err(|_| invalid(format!("unknown primitive kind '{s}' (expected sphere, box, capsule or cylinder)")))
}

fn sample_bounds(cfg: &DatasetConfig) -> CliResult<Aabb> {
    if !(cfg.sample_box_half > 0.0) {
        return Err(invalid("sample_box_half must be positive"));
    }
    Ok(Aabb::cube(cfg.sample_box_half))
}

#[derive(Serialize)]
struct GenEcho<'a> {
    seed: u64,
    dataset: &'a DatasetConfig,
}

fn gen_data(mut cfg: PipelineConfig, args: GenDataArgs, out: &Path) -> CliResult<()> {
    if let Some(n) = args.count {
        cfg.dataset.count = n;
    }
    if let Some(k) = &args.kinds {
        cfg.dataset.kinds = k.iter().map(|s| parse_kind(s)).collect::<CliResult<_>>()?;
    }
    if let Some(n) = args.samples {
        cfg.dataset.samples_per_scene = n;
    }
    let ds = &cfg.dataset;
    if ds.count == 0 || ds.kinds.is_empty() || ds.samples_per_scene == 0 {
        return Err(invalid("count, kinds and samples_per_scene must be non-empty"));
    }
    let bounds = sample_bounds(ds)?;
    fs::create_dir_all(out)?;
    let echo = serde_json::to_value(GenEcho { seed: cfg.seed, dataset: ds })?;

    if let Some(depth) = args.penetration {
        let (scene, touching) = penetration_scene(depth)?;
        let samples = sample_points(&scene, ds.samples_per_scene, ds.surface_band, &bounds, scene_seed(cfg.seed, 0))?;
        let dir = scene_dir_name(0);
        write_scene(&out.join(&dir), &scene, &samples)?;
        write_hand(&out.join(&dir).join("hand_gt.json"), &scene.model, &touching)?;
        let manifest = DatasetManifest {
            seed: cfg.seed,
            samples_per_scene: ds.samples_per_scene,
            surface_band: ds.surface_band,
            near_surface_percent: NEAR_SURFACE_PERCENT,
            sample_bounds: bounds,
            scenes: vec![ManifestEntry { dir, kind: scene.kind, grasp: scene.grasp, seed: scene.seed, samples: samples.len() }],
            config: echo,
        };
        manifest.save(out)?;
        return Ok(());
    }

    let results = map_range(Execution::default(), ds.count, |i| {
        let kind = ds.kinds[i % ds.kinds.len()];
        let seed = scene_seed(cfg.seed, i as u64);
        let made = generate_grasp_scene_with(kind, seed, Execution::Sequential).and_then(|scene| {
            let samples = sample_points(&scene, ds.samples_per_scene, ds.surface_band, &bounds, scene_seed(seed, 1))?;
            let dir = scene_dir_name(i);
            write_scene(&out.join(&dir), &scene, &samples)?;
            Ok(ManifestEntry { dir, kind, grasp: scene.grasp, seed, samples: samples.len() })
        });
        (i, made)
    });
    let mut scenes = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results {
        match r {
            Ok(e) => scenes.push(e),
            Err(e) => {
                log::error!("scene {i}: {e}");
                failures.push((i, e));
            }
        }
    }
    let manifest = DatasetManifest {
        seed: cfg.seed,
        samples_per_scene: ds.samples_per_scene,
        surface_band: ds.surface_band,
        near_surface_percent: NEAR_SURFACE_PERCENT,
        sample_bounds: bounds,
        scenes,
        config: echo,
    };
    manifest.save(out)?;
    match failures.into_iter().next() {
        None => Ok(()),
        Some((i, e)) => Err(match e {
            Error::Io(io) => CliError::Core(Error::Io(io)),
            other => CliError::Core(Error::Generation(format!("scene {i}: {other}"))),
        }),
    }
}

fn training_scenes(dir: &Path, network: &NetworkConfig) -> CliResult<Vec<TrainingScene>> {
    let (_, scenes) = read_dataset(dir)?;
    if scenes.is_empty() {
        return Err(invalid("dataset lists no scenes"));
    }
    Ok(scenes
        .iter()
        .map(|(scene, samples)| scene.training_scene(samples, &network.pyramid))
        .collect::<gripsdf::Result<_>>()?)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    config: &'a PipelineConfig,
    dataset: &'a Path,
    resumed_from_iteration: u64,
    iterations: u64,
    final_loss: Option<f64>,
    mean_abs_error_mm: Vec<f64>,
}

fn train(mut cfg: PipelineConfig, args: TrainArgs, out: &Path) -> CliResult<()> {
    if let Some(n) = args.iterations {
        cfg.train.iterations = n;
    }
    let dataset = args
        .dataset
        .or_else(|| cfg.paths.dataset.clone())
        .ok_or_else(|| invalid("no dataset given (--dataset or paths.dataset)"))?;
    require_dir(&dataset, "dataset")?;
    require_file(&dataset.join("manifest.json"), "manifest")?;
    if let Some(r) = &args.resume {
        require_file(r, "checkpoint")?;
    }
    cfg.train.validate()?;

    let mut trainer = match &args.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            let adam = ck.adam.ok_or_else(|| invalid("checkpoint has no optimizer state to resume from"))?;
            cfg.network = ck.network.config().clone();
            Trainer::resume(ck.network, adam, cfg.train.clone())?
        }
        None => Trainer::new(SdfNetwork::new(cfg.network.clone())?, cfg.train.clone())?,
    };
    let data = training_scenes(&dataset, &cfg.network)?;
    for s in &data {
        trainer.network.check_scene(&s.context)?;
    }
    fs::create_dir_all(out)?;
    let start = trainer.iteration();
    let mut csv = String::from("iteration,loss,data_term,eikonal_term\n");
    let every = cfg.train.checkpoint_every;
    let log = trainer.run(&data, |t, r| {
        if every > 0 && r.iteration % every == 0 && r.iteration < t.config.iterations {
            Checkpoint::new(t.network.clone(), Some(t.adam.clone()), r.iteration, Some(t.config.clone()))
                .save(&out.join(format!("checkpoint_{:06}.nsdf", r.iteration)))?;
        }
        Ok(())
    })?;
    for r in &log {
        csv.push_str(&format!("{},{},{},{}\n", r.iteration, r.loss, r.data_term, r.eikonal_term));
    }
    fs::write(out.join("loss.csv"), csv)?;
    let ck = Checkpoint::new(trainer.network.clone(), Some(trainer.adam.clone()), trainer.iteration(), Some(cfg.train.clone()));
    ck.save(&out.join("checkpoint.nsdf"))?;
    let mae = data
        .iter()
        .map(|s| mean_abs_error(&trainer.network, s, Execution::default()))
        .collect::<gripsdf::Result<Vec<_>>>()?;
    write_json(
        &out.join("train.json"),
        &TrainSummary {
            config: &cfg,
            dataset: &dataset,
            resumed_from_iteration: start,
            iterations: trainer.iteration(),
            final_loss: log.last().map(|r| r.loss),
            mean_abs_error_mm: mae,
        },
    )
}

fn load_checkpoint(arg: Option<PathBuf>, cfg: &PipelineConfig) -> CliResult<Option<(PathBuf, Checkpoint)>> {
    match arg.or_else(|| cfg.paths.checkpoint.clone()) {
        Some(p) => {
            require_file(&p, "checkpoint")?;
            let ck = Checkpoint::load(&p)?;
            Ok(Some((p, ck)))
        }
        None => Ok(None),
    }
}

#[derive(Serialize)]
struct ReconstructEcho<'a> {
    config: &'a ReconstructConfig,
    checkpoint: &'a Path,
    scene: &'a Path,
    vertices: usize,
    triangles: usize,
}

/// Wrist-frame mesh mapped into the camera frame of `scene`.
pub fn to_camera_frame(mesh: &Mesh, global: &gripsdf::kinematics::RigidTransform, depth_offset: &Vec3) -> Mesh {
    mesh.transformed(global).translated(depth_offset)
}

fn cmd_reconstruct(mut cfg: PipelineConfig, args: ReconstructArgs, out: &Path) -> CliResult<()> {
    if let Some(r) = args.resolution {
        cfg.reconstruct.resolution = r;
    }
    if let Some(f) = args.frame {
        cfg.reconstruct.frame = f;
    }
    let rc = &cfg.reconstruct;
    if rc.resolution < 2 || !(rc.bounds_half > 0.0) {
        return Err(invalid("reconstruction needs resolution >= 2 and positive bounds"));
    }
    require_dir(&args.scene, "scene")?;
    let (ck_path, ck) = load_checkpoint(args.checkpoint, &cfg)?.ok_or_else(|| invalid("no checkpoint given"))?;
    let (scene, _) = read_scene(&args.scene)?;
    let net = ck.network;
    let context = scene.context(&net.config().pyramid)?;
    net.check_scene(&context)?;
    let bounds = Aabb::cube(rc.bounds_half);
    let field = NeuralSdf::new(&net, &context, bounds)?;
    let (mesh, grid) = reconstruct(&field, &bounds, [rc.resolution; 3], Execution::default())?;
    let mesh = match rc.frame {
        Frame::Wrist => mesh,
        Frame::Camera => to_camera_frame(&mesh, &scene.hand_pose.global_transform(), &scene.camera.depth_offset),
    };
    fs::create_dir_all(out)?;
    fs::write(out.join("mesh.obj"), export_mesh(&mesh, MeshFormat::Obj)?)?;
    fs::write(out.join("grid.gsdf"), grid.to_bytes())?;
    write_json(
        &out.join("reconstruct.json"),
        &ReconstructEcho {
            config: rc,
            checkpoint: &ck_path,
            scene: &args.scene,
            vertices: mesh.vertices.len(),
            triangles: mesh.triangles.len(),
        },
    )?;
    if mesh.is_empty() {
        return Err(CliError::Warning("the field has no zero crossing inside the bounds; mesh is empty".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct RefineOutput<'a> {
    config: &'a RefineConfig,
    scene: &'a Path,
    field: &'a str,
    checkpoint: Option<&'a Path>,
    initial_penalty: f64,
    final_penalty: f64,
    penalty_reduction: f64,
    initial_epe_mm: Option<f64>,
    final_epe_mm: Option<f64>,
    report: &'a RefineReport,
}

/// Intersection penalty of a pose's capsule-surface samples.
pub fn pose_penalty<F: SdfField + ?Sized>(field: &F, model: &HandModel, pose: &HandPose, per_bone: usize) -> gripsdf::Result<f64> {
    let pts: Vec<Vec3> = hand_surface_points(model, &pose.articulation, per_bone)?.into_iter().map(|s| s.position).collect();
    intersection_penalty(field, &pts)
}

fn refine(mut cfg: PipelineConfig, args: RefineArgs, out: &Path) -> CliResult<()> {
    if let Some(s) = args.steps {
        cfg.refine.steps = s;
    }
    cfg.refine.validate()?;
    require_dir(&args.scene, "scene")?;
    let ck = load_checkpoint(args.checkpoint, &cfg)?;
    let (scene, _) = read_scene(&args.scene)?;
    let gt_path = args.scene.join("hand_gt.json");
    let gt = if gt_path.is_file() { Some(read_hand(&gt_path)?.1) } else { None };

    let context;
    let neural;
    let (field, kind): (&dyn SdfField, &str) = match &ck {
        Some((_, ck)) => {
            context = scene.context(&ck.network.config().pyramid)?;
            ck.network.check_scene(&context)?;
            neural = NeuralSdf::new(&ck.network, &context, Aabb::cube(cfg.reconstruct.bounds_half))?;
            (&neural, "neural")
        }
        None => (&scene.object, "analytic"),
    };
    let rc = &cfg.refine;
    let (refined, report) = refine_pose(field, &scene.model, &scene.hand_pose, rc)?;
    if report.diverged {
        return Err(CliError::Core(Error::Diverged(report.total.len() as u64)));
    }
    let p0 = pose_penalty(field, &scene.model, &scene.hand_pose, rc.hand_samples_per_bone)?;
    let p1 = pose_penalty(field, &scene.model, &refined, rc.hand_samples_per_bone)?;
    let epe = |p: &HandPose| gt.as_ref().map(|g| end_point_error(p, g, &scene.model)).transpose();
    fs::create_dir_all(out)?;
    write_hand(&out.join("hand.json"), &scene.model, &refined)?;
    write_json(
        &out.join("refine.json"),
        &RefineOutput {
            config: rc,
            scene: &args.scene,
            field: kind,
            checkpoint: ck.as_ref().map(|(p, _)| p.as_path()),
            initial_penalty: p0,
            final_penalty: p1,
            penalty_reduction: if p0 > 0.0 { 1.0 - p1 / p0 } else { 0.0 },
            initial_epe_mm: epe(&scene.hand_pose)?,
            final_epe_mm: epe(&refined)?,
            report: &report,
        },
    )
}

/// Triangulated capsule hand for intersection volumes.
pub fn hand_mesh(model: &HandModel, pose: &HandPose) -> gripsdf::Result<Mesh> {
    let field: AnalyticSdf = hand_capsules(model, &pose.articulation)?;
    let bounds = field.bounds().padded(2.0 * HAND_MESH_SPACING);
    let e = bounds.extent();
    let res = [0, 1, 2].map(|a| (e[a] / HAND_MESH_SPACING).ceil() as usize + 1);
    marching_cubes(&field, &bounds, res)
}

fn load_mesh_arg(path: &Path) -> CliResult<Mesh> {
    if path.is_dir() {
        let f = SceneFiles::new(path).object_mesh();
        require_file(&f, "scene object mesh")?;
        return Ok(read_mesh(&f)?);
    }
    require_file(path, "mesh")?;
    Ok(read_mesh(path)?)
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: &'a MetricOptions,
    pred: &'a Path,
    gt: &'a Path,
    hand: Option<&'a Path>,
    metrics: gripsdf::metrics::MetricReport,
}

fn eval(cfg: PipelineConfig, args: EvalArgs, out: &Path) -> CliResult<()> {
    let pred = load_mesh_arg(&args.pred)?;
    let gt = load_mesh_arg(&args.gt)?;
    if let Some(h) = &args.hand {
        require_file(h, "hand")?;
    }
    if let Some(pair) = &args.epe {
        for p in pair {
            require_file(p, "hand")?;
        }
    }
    let mut report = compare_meshes(&pred, &gt, &cfg.metrics)?;
    if let Some(h) = &args.hand {
        let (model, pose) = read_hand(h)?;
        let hand = hand_mesh(&model, &pose)?;
        if !pred.is_empty() {
            report.intersection_volume_cm3 = Some(intersection_volume(&pred, &hand, cfg.metrics.voxel)?.volume_cm3);
            report.voxel_mm = Some(cfg.metrics.voxel);
        }
    }
    if let Some(pair) = &args.epe {
        let (model, a) = read_hand(&pair[0])?;
        let (_, b) = read_hand(&pair[1])?;
        report.epe_mm = Some(end_point_error(&a, &b, &model)?);
    }
    fs::create_dir_all(out)?;
    write_json(
        &out.join("metrics.json"),
        &EvalOutput { config: &cfg.metrics, pred: &args.pred, gt: &args.gt, hand: args.hand.as_deref(), metrics: report },
    )
}

fn export(args: ExportArgs, out: &Path) -> CliResult<()> {
    require_file(&args.input, "mesh")?;
    let name = Path::new(&args.output);
    if name.components().count() != 1 {
        return Err(invalid("--output must be a bare file name; it is written under --out"));
    }
    let format = MeshFormat::from_path(name)?;
    let mesh = read_mesh(&args.input)?;
    fs::create_dir_all(out)?;
    fs::write(out.join(name), export_mesh(&mesh, format)?)?;
    Ok(())
}
