//! On-disk dataset layout.
//!
//! ```text
//! manifest.json
//! scene_00000/
//!     hand.json      {"model": .., "pose": [51 scalars]}
//!     camera.json    {"focal", "cx", "cy", "width", "height", "offset"}
//!     object.obj     triangulated object, wrist frame
//!     object.json    {"seed", "kind", "grasp", "object": AnalyticSdf}
//!     image.npyish   "IMGF", u32 h, w, c, then h*w*c f32 (row-major, channel fastest)
//!     samples.bin    "SMPL", u32 n, then n * (f32 x, y, z, sdf, flag)
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GraspKind, SampleSet, SceneSpec};
use crate::camera::CameraRig;
use crate::field::{AnalyticSdf, FeatureImage, PrimitiveKind};
use crate::kinematics::{HandModel, HandPose};
use crate::mesh::{read_mesh, write_mesh};
use crate::{Aabb, Error, Result, Vec3};

const IMAGE_MAGIC: &[u8; 4] = b"IMGF";
const SAMPLES_MAGIC: &[u8; 4] = b"SMPL";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub dir: String,
    pub kind: PrimitiveKind,
    pub grasp: GraspKind,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub samples_per_scene: usize,
    pub surface_band: f64,
    pub near_surface_percent: usize,
    /// Box for the uniform samples, intersected with the camera frustum.
    pub sample_bounds: Aabb,
    pub scenes: Vec<ManifestEntry>,
    /// Echo of the generating configuration.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl DatasetManifest {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?)
    }
}

pub fn scene_dir_name(index: usize) -> String {
    format!("scene_{index:05}")
}

#[derive(Serialize, Deserialize)]
struct HandRecord {
    model: HandModel,
    pose: HandPose,
}

/// Writes a `hand.json` file.
pub fn write_hand(path: &Path, model: &HandModel, pose: &HandPose) -> Result<()> {
    let rec = HandRecord { model: model.clone(), pose: pose.clone() };
    fs::write(path, serde_json::to_vec_pretty(&rec)?)?;
    Ok(())
}

/// Reads a `hand.json` file.
pub fn read_hand(path: &Path) -> Result<(HandModel, HandPose)> {
    let rec: HandRecord = serde_json::from_slice(&fs::read(path)?)?;
    Ok((rec.model, rec.pose))
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    seed: u64,
    kind: PrimitiveKind,
    grasp: GraspKind,
    object: AnalyticSdf,
}

/// Paths of one scene directory.
#[derive(Clone, Debug)]
pub struct SceneFiles {
    pub dir: PathBuf,
}

impl SceneFiles {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn hand(&self) -> PathBuf {
        self.dir.join("hand.json")
    }

    pub fn camera(&self) -> PathBuf {
        self.dir.join("camera.json")
    }

    pub fn object_mesh(&self) -> PathBuf {
        self.dir.join("object.obj")
    }

    pub fn object(&self) -> PathBuf {
        self.dir.join("object.json")
    }

    pub fn image(&self) -> PathBuf {
        self.dir.join("image.npyish")
    }

    pub fn samples(&self) -> PathBuf {
        self.dir.join("samples.bin")
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; 4 * n];
    r.read_exact(&mut bytes).map_err(|_| Error::Format("truncated payload".into()))?;
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

fn check_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m).map_err(|_| Error::Format("file too short".into()))?;
    if &m != magic {
        return Err(Error::Format(format!("bad magic, expected {}", String::from_utf8_lossy(magic))));
    }
    Ok(())
}

pub fn write_image(w: &mut impl Write, image: &FeatureImage) -> Result<()> {
    w.write_all(IMAGE_MAGIC)?;
    for d in [image.height(), image.width(), image.channels()] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for v in image.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_image(r: &mut impl Read) -> Result<FeatureImage> {
    check_magic(r, IMAGE_MAGIC)?;
    let (h, w, c) = (read_u32(r)? as usize, read_u32(r)? as usize, read_u32(r)? as usize);
    let data = read_f32s(r, h * w * c)?;
    FeatureImage::new(w, h, c, data)
}

pub fn write_samples(w: &mut impl Write, samples: &SampleSet) -> Result<()> {
    w.write_all(SAMPLES_MAGIC)?;
    w.write_all(&(samples.len() as u32).to_le_bytes())?;
    for i in 0..samples.len() {
        let p = &samples.points[i];
        let flag = if samples.near_surface_flags[i] { 1.0 } else { 0.0 };
        for v in [p.x as f32, p.y as f32, p.z as f32, samples.sdf_values[i] as f32, flag] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_samples(r: &mut impl Read) -> Result<SampleSet> {
    check_magic(r, SAMPLES_MAGIC)?;
    let n = read_u32(r)? as usize;
    let raw = read_f32s(r, 5 * n)?;
    let mut out = SampleSet::default();
    for c in raw.chunks_exact(5) {
        out.points.push(Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64));
        out.sdf_values.push(c[3] as f64);
        out.near_surface_flags.push(c[4] != 0.0);
    }
    Ok(out)
}

/// Writes one scene directory (created if missing).
pub fn write_scene(dir: &Path, scene: &SceneSpec, samples: &SampleSet) -> Result<()> {
    fs::create_dir_all(dir)?;
    let files = SceneFiles::new(dir);
    write_hand(&files.hand(), &scene.model, &scene.hand_pose)?;
    fs::write(files.camera(), serde_json::to_vec_pretty(&scene.camera)?)?;
    let object = ObjectRecord { seed: scene.seed, kind: scene.kind, grasp: scene.grasp, object: scene.object.clone() };
    fs::write(files.object(), serde_json::to_vec_pretty(&object)?)?;
    write_mesh(&files.object_mesh(), &scene.object_mesh)?;
    let mut buf = Vec::new();
    write_image(&mut buf, &scene.image)?;
    fs::write(files.image(), &buf)?;
    buf.clear();
    write_samples(&mut buf, samples)?;
    fs::write(files.samples(), &buf)?;
    Ok(())
}

pub fn read_scene(dir: &Path) -> Result<(SceneSpec, SampleSet)> {
    let files = SceneFiles::new(dir);
    let (model, hand_pose) = read_hand(&files.hand())?;
    let camera: CameraRig = serde_json::from_slice(&fs::read(files.camera())?)?;
    let object: ObjectRecord = serde_json::from_slice(&fs::read(files.object())?)?;
    let image = read_image(&mut fs::read(files.image())?.as_slice())?;
    let samples = read_samples(&mut fs::read(files.samples())?.as_slice())?;
    let scene = SceneSpec {
        seed: object.seed,
        kind: object.kind,
        grasp: object.grasp,
        object: object.object,
        object_mesh: read_mesh(&files.object_mesh())?,
        model,
        hand_pose,
        camera,
        image,
    };
    Ok((scene, samples))
}

/// Manifest plus every scene it lists.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<(SceneSpec, SampleSet)>)> {
    let manifest = DatasetManifest::load(dir)?;
    let scenes = manifest.scenes.iter().map(|e| read_scene(&dir.join(&e.dir))).collect::<Result<Vec<_>>>()?;
    Ok((manifest, scenes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_sample_bounds, generate_grasp_scene, sample_points};

    #[test]
    fn scene_round_trip() {
        let scene = generate_grasp_scene(PrimitiveKind::Sphere, 4).unwrap();
        let samples = sample_points(&scene, 50, 10.0, &default_sample_bounds(), 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_scene(dir.path(), &scene, &samples).unwrap();
        let (back, s) = read_scene(dir.path()).unwrap();
        assert_eq!(back.object, scene.object);
        assert_eq!(back.hand_pose, scene.hand_pose);
        assert_eq!(back.camera, scene.camera);
        assert_eq!(back.image, scene.image);
        assert_eq!(back.object_mesh.triangles, scene.object_mesh.triangles);
        assert_eq!(s.len(), 50);
        assert_eq!(s.near_surface_flags, samples.near_surface_flags);
        for (a, b) in s.points.iter().zip(&samples.points) {
            assert!((a - b).norm() < 1e-4);
        }
    }

    #[test]
    fn bad_magic() {
        assert!(matches!(read_image(&mut &b"XXXX\0\0\0\0"[..]), Err(Error::Format(_))));
        assert!(matches!(read_samples(&mut &b"SMPL\x02\0\0\0"[..]), Err(Error::Format(_))));
    }
}
