//! Synthetic grasp scenes and SDF supervision.
//!
//! A scene is a primitive object resting against a posed capsule hand, both
//! in the wrist frame, plus a camera and a rendered mask/depth image.

mod io;
mod mesh_sdf;
mod render;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::camera::{project, CameraRig, Intrinsics};
use crate::error::invalid;
use crate::field::{hand_capsules, AnalyticSdf, FeatureImage, FeaturePyramid, Primitive, PrimitiveKind, PyramidConfig, SdfField};
use crate::kinematics::{finger_frame, HandModel, HandPose, ARTICULATION_DIM};
use crate::mesh::Mesh;
use crate::neural::{SceneContext, TrainingScene};
use crate::par::Execution;
use crate::{Aabb, Error, Result, Vec3};

pub use io::{
    read_dataset, read_hand, read_image, read_samples, read_scene, scene_dir_name, write_hand, write_image,
    write_samples, write_scene,
    DatasetManifest, ManifestEntry, SceneFiles,
};
pub use mesh_sdf::{closest_point_on_triangle, point_mesh_sdf, points_mesh_sdf, MeshSdf};
pub use render::{render_mask_depth, BACKGROUND_DEPTH, DEPTH_CHANNEL, IMAGE_CHANNELS, MASK_CHANNEL};

/// Percentage of samples drawn near the surface.
pub const NEAR_SURFACE_PERCENT: usize = 95;
pub const DEFAULT_SURFACE_BAND: f64 = 10.0;
/// Half-width (mm) of the wrist-frame box for uniform samples.
pub const SAMPLE_BOX_HALF: f64 = 150.0;
/// Chord tolerance (mm) for object triangulations.
pub const MESH_TOLERANCE: f64 = 0.1;

const GRASP_JITTER: f64 = 0.05;
const MAX_PLACEMENT_ATTEMPTS: usize = 32;
const PALM_ANCHOR: [f64; 3] = [60.0, 0.0, -15.0];
const AXIS_SAMPLES: usize = 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspKind {
    Power,
    Pinch,
    Flat,
}

impl GraspKind {
    pub const ALL: [GraspKind; 3] = [GraspKind::Power, GraspKind::Pinch, GraspKind::Flat];

    /// Canonical articulation. Fingers flex about +y, which curls them
    /// toward the palm side (-z).
    pub fn articulation(&self) -> [f64; ARTICULATION_DIM] {
        let (thumb, fingers): ([[f64; 3]; 3], [[f64; 3]; 4]) = match self {
            GraspKind::Power => (
                [[-0.6, 0.3, 0.0], [0.0, 0.4, 0.0], [0.0, 0.3, 0.0]],
                [[0.8, 1.0, 0.7]; 4],
            ),
            GraspKind::Pinch => (
                [[-0.8, 0.2, 0.2], [0.0, 0.3, 0.0], [0.0, 0.3, 0.0]],
                [[0.6, 0.7, 0.4], [0.5, 0.6, 0.4], [1.2, 1.3, 0.9], [1.2, 1.3, 0.9]],
            ),
            GraspKind::Flat => (
                [[-0.2, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.05, 0.0]],
                [[0.1, 0.1, 0.05]; 4],
            ),
        };
        let mut a = [0.0; ARTICULATION_DIM];
        for (k, aa) in thumb.iter().enumerate() {
            let i = 3 * (finger_frame(0, k) - 1);
            a[i..i + 3].copy_from_slice(aa);
        }
        for (f, flex) in fingers.iter().enumerate() {
            for (k, angle) in flex.iter().enumerate() {
                a[3 * (finger_frame(f + 1, k) - 1) + 1] = *angle;
            }
        }
        a
    }
}

/// One synthetic grasp.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub kind: PrimitiveKind,
    pub grasp: GraspKind,
    /// Object in the wrist frame.
    pub object: AnalyticSdf,
    pub object_mesh: Mesh,
    pub model: HandModel,
    pub hand_pose: HandPose,
    pub camera: CameraRig,
    pub image: FeatureImage,
}

impl SceneSpec {
    pub fn hand_field(&self) -> Result<AnalyticSdf> {
        hand_capsules(&self.model, &self.hand_pose.articulation)
    }

    /// Decoder conditioning for this scene.
    pub fn context(&self, pyramid: &PyramidConfig) -> Result<SceneContext> {
        Ok(SceneContext {
            model: self.model.clone(),
            pose: self.hand_pose.clone(),
            camera: self.camera,
            pyramid: FeaturePyramid::from_image(&self.image, pyramid)?,
        })
    }

    pub fn training_scene(&self, samples: &SampleSet, pyramid: &PyramidConfig) -> Result<TrainingScene> {
        Ok(TrainingScene {
            context: self.context(pyramid)?,
            points: samples.points.clone(),
            sdf: samples.sdf_values.clone(),
        })
    }
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Vec3 {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    Vec3::from(axis) * rng.random_range(0.0..=max_angle)
}

/// Object of the given kind, centered at the origin, with largest dimension
/// in 30..120 mm.
fn random_primitive(kind: PrimitiveKind, rng: &mut ChaCha8Rng) -> Primitive {
    let size: f64 = rng.random_range(30.0..=120.0);
    let rotation = random_rotation(rng, PI);
    let axis = crate::kinematics::rodrigues(&rotation) * Vec3::z();
    match kind {
        PrimitiveKind::Sphere => Primitive::Sphere { center: Vec3::zeros(), radius: size / 2.0 },
        PrimitiveKind::Box => {
            let h = size / 2.0;
            Primitive::Box {
                center: Vec3::zeros(),
                half_extents: Vec3::new(h, h * rng.random_range(0.5..=1.0), h * rng.random_range(0.5..=1.0)),
                rotation,
            }
        }
        PrimitiveKind::Capsule => {
            let radius = size * rng.random_range(0.15..=0.3);
            let half = size / 2.0 - radius;
            Primitive::Capsule { a: -axis * half, b: axis * half, radius }
        }
        PrimitiveKind::Cylinder => Primitive::Cylinder {
            center: Vec3::zeros(),
            axis,
            half_height: size / 2.0,
            radius: size * rng.random_range(0.2..=0.4),
        },
    }
}

fn translate(p: &Primitive, d: &Vec3) -> Primitive {
    match p.clone() {
        Primitive::Sphere { center, radius } => Primitive::Sphere { center: center + d, radius },
        Primitive::Box { center, half_extents, rotation } => Primitive::Box { center: center + d, half_extents, rotation },
        Primitive::Capsule { a, b, radius } => Primitive::Capsule { a: a + d, b: b + d, radius },
        Primitive::Cylinder { center, axis, half_height, radius } => {
            Primitive::Cylinder { center: center + d, axis, half_height, radius }
        }
    }
}

/// Points along every bone axis with the bone radius.
fn bone_axis_samples(model: &HandModel, articulation: &[f64]) -> Result<Vec<(Vec3, f64)>> {
    let placements = model.skeleton().placements(articulation)?;
    let mut out = Vec::new();
    for bone in model.bones() {
        let t = &placements[bone.frame];
        let (a, b) = (t.apply(&bone.start), t.apply(&bone.end));
        for i in 0..AXIS_SAMPLES {
            let s = i as f64 / (AXIS_SAMPLES - 1) as f64;
            out.push((a + (b - a) * s, bone.radius));
        }
    }
    Ok(out)
}

/// Smallest gap (mm) between `object` and the hand capsules; negative when
/// they overlap.
pub fn hand_object_clearance(object: &Primitive, model: &HandModel, articulation: &[f64]) -> Result<f64> {
    Ok(clearance(object, &bone_axis_samples(model, articulation)?))
}

fn clearance(object: &Primitive, axis: &[(Vec3, f64)]) -> f64 {
    axis.iter().map(|(p, r)| object.sdf(p) - r).fold(f64::INFINITY, f64::min)
}

/// Slides `object` along `direction` from the palm anchor until it just
/// touches the hand.
fn place_against_hand(object: &Primitive, axis: &[(Vec3, f64)], direction: &Vec3) -> Option<Primitive> {
    let anchor = Vec3::from(PALM_ANCHOR);
    let at = |d: f64| translate(object, &(anchor + direction * d));
    let (mut lo, mut hi) = (0.0, 2.0 * SAMPLE_BOX_HALF);
    if clearance(&at(hi), axis) <= 0.0 {
        return None;
    }
    if clearance(&at(lo), axis) >= 0.0 {
        return Some(at(lo));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if clearance(&at(mid), axis) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(at(hi))
}

/// Deterministic grasp scene for `seed`.
pub fn generate_grasp_scene(kind: PrimitiveKind, seed: u64) -> Result<SceneSpec> {
    generate_grasp_scene_with(kind, seed, Execution::default())
}

pub fn generate_grasp_scene_with(kind: PrimitiveKind, seed: u64, exec: Execution) -> Result<SceneSpec> {
    let model = HandModel::default_adult();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, GRASP_JITTER).expect("constant stddev");
    let sample_box = Aabb::cube(SAMPLE_BOX_HALF);
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let grasp = GraspKind::ALL[rng.random_range(0..GraspKind::ALL.len())];
        let mut articulation = grasp.articulation();
        for a in articulation.iter_mut() {
            *a += jitter.sample(&mut rng);
        }
        let primitive = random_primitive(kind, &mut rng);
        let direction = Vec3::new(rng.random_range(-0.3..=0.3), rng.random_range(-0.3..=0.3), -1.0).normalize();
        let global_rotation = random_rotation(&mut rng, 0.25);
        let depth = rng.random_range(480.0..=520.0);

        let axis = bone_axis_samples(&model, &articulation)?;
        let Some(placed) = place_against_hand(&primitive, &axis, &direction) else { continue };
        let bounds = placed.bounds();
        if !(sample_box.contains(&bounds.min) && sample_box.contains(&bounds.max)) {
            continue;
        }
        let mut pose = HandPose::from_articulation(articulation);
        pose.global_rotation = global_rotation;
        let global = pose.global_transform();
        // Center the object in the image.
        let c = global.apply(&bounds.center());
        let camera = CameraRig::new(Intrinsics::default(), Vec3::new(-c.x, -c.y, depth))?;
        let object = AnalyticSdf::new(placed.clone())?;
        let hand = hand_capsules(&model, &articulation)?;
        let image = render_mask_depth(&object, &hand, &global, &camera, exec)?;
        return Ok(SceneSpec {
            seed,
            kind,
            grasp,
            object_mesh: placed.triangulate(MESH_TOLERANCE),
            object,
            model,
            hand_pose: pose,
            camera,
            image,
        });
    }
    Err(Error::Generation(format!("no valid {kind} placement after {MAX_PLACEMENT_ATTEMPTS} attempts (seed {seed})")))
}

/// A flat hand whose index fingertip rests on a small sphere, plus a copy of
/// the pose with the index knuckle flexed until the finger penetrates the
/// sphere by `depth` mm.
///
/// Returns the scene (posed with the penetrating hand) and the touching pose.
pub fn penetration_scene(depth: f64) -> Result<(SceneSpec, HandPose)> {
    if !(depth > 0.0 && depth < 15.0) {
        return Err(invalid("penetration depth must be in (0, 15) mm"));
    }
    let model = HandModel::default_adult();
    let touching = HandPose::zero();
    let radius = 15.0;
    // Index distal phalanx runs along x at y = 22, z = 0 in the rest pose;
    // the sphere sits below it, nudged away from the middle finger, and is
    // lowered until it just touches.
    let sphere_at = |z: f64| Primitive::Sphere { center: Vec3::new(166.0, 27.0, z), radius };
    let (mut near, mut far) = (-radius, -80.0);
    for _ in 0..60 {
        let mid = 0.5 * (near + far);
        if hand_object_clearance(&sphere_at(mid), &model, &touching.articulation)? < 0.0 {
            near = mid;
        } else {
            far = mid;
        }
    }
    let sphere = sphere_at(far);
    let center = Vec3::new(166.0, 27.0, far);
    let flex = 3 * (finger_frame(1, 0) - 1) + 1;
    let penetration = |angle: f64| -> Result<f64> {
        let mut a = touching.articulation;
        a[flex] += angle;
        Ok(-hand_object_clearance(&sphere, &model, &a)?)
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    if penetration(hi)? < depth {
        return Err(Error::Generation("cannot reach the requested penetration".into()));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if penetration(mid)? < depth {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut pose = touching.clone();
    pose.articulation[flex] += hi;
    let global = pose.global_transform();
    let c = global.apply(&center);
    let camera = CameraRig::new(Intrinsics::default(), Vec3::new(-c.x, -c.y, 500.0))?;
    let object = AnalyticSdf::new(sphere.clone())?;
    let image = render_mask_depth(&object, &hand_capsules(&model, &pose.articulation)?, &global, &camera, Execution::default())?;
    let scene = SceneSpec {
        seed: 0,
        kind: PrimitiveKind::Sphere,
        grasp: GraspKind::Flat,
        object_mesh: sphere.triangulate(MESH_TOLERANCE),
        object,
        model,
        hand_pose: pose,
        camera,
        image,
    };
    Ok((scene, touching))
}

/// Per-scene seed derived from a root seed and a scene counter.
pub fn scene_seed(root: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the combined counter.
    let mut z = root ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Query points with ground-truth signed distances (mm, wrist frame).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec3>,
    pub sdf_values: Vec<f64>,
    pub near_surface_flags: Vec<bool>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn near_surface_count(&self) -> usize {
        self.near_surface_flags.iter().filter(|f| **f).count()
    }
}

/// Number of near-surface samples out of `n`; the uniform share is rounded down.
pub fn near_surface_count(n: usize) -> usize {
    n - n * (100 - NEAR_SURFACE_PERCENT) / 100
}

/// Draws `n` supervision points for `scene`.
///
/// Near-surface points are object-surface samples plus isotropic Gaussian
/// offsets (stddev `band / 3`), redrawn until `|sdf| <= band`. The rest are
/// uniform in `bounds` restricted to points that project inside the image.
pub fn sample_points(scene: &SceneSpec, n: usize, band: f64, bounds: &Aabb, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    if !(band > 0.0 && band.is_finite()) {
        return Err(invalid("surface band must be positive"));
    }
    if bounds.is_degenerate() {
        return Err(invalid("sampling bounds are degenerate"));
    }
    let near = near_surface_count(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = Normal::new(0.0, band / 3.0).expect("band is positive");
    let surface = scene.object_mesh.sample_surface(near, rng.random());
    if surface.len() != near {
        return Err(invalid("object mesh has no area"));
    }
    let mut out = SampleSet {
        points: Vec::with_capacity(n),
        sdf_values: Vec::with_capacity(n),
        near_surface_flags: Vec::with_capacity(n),
    };
    for s in &surface {
        loop {
            let p = s + Vec3::new(offset.sample(&mut rng), offset.sample(&mut rng), offset.sample(&mut rng));
            let d = scene.object.eval(&p);
            if d.abs() <= band {
                out.points.push(p);
                out.sdf_values.push(d);
                out.near_surface_flags.push(true);
                break;
            }
        }
    }
    let global = scene.hand_pose.global_transform();
    let (w, h) = (scene.camera.intrinsics.width() as f64, scene.camera.intrinsics.height() as f64);
    let visible = |p: &Vec3| match project(&scene.camera, &global, p) {
        Ok([u, v]) => (0.0..=w).contains(&u) && (0.0..=h).contains(&v),
        Err(_) => false,
    };
    let uniform = n - near;
    let max_attempts = 10_000 * uniform.max(1);
    let mut attempts = 0;
    while out.points.len() < n {
        attempts += 1;
        if attempts > max_attempts {
            return Err(invalid("sampling bounds barely intersect the camera frustum"));
        }
        let p = Vec3::new(
            rng.random_range(bounds.min.x..=bounds.max.x),
            rng.random_range(bounds.min.y..=bounds.max.y),
            rng.random_range(bounds.min.z..=bounds.max.z),
        );
        if visible(&p) {
            out.points.push(p);
            out.sdf_values.push(scene.object.eval(&p));
            out.near_surface_flags.push(false);
        }
    }
    Ok(out)
}

/// The default uniform-sample box (±150 mm around the wrist).
pub fn default_sample_bounds() -> Aabb {
    Aabb::cube(SAMPLE_BOX_HALF)
}
