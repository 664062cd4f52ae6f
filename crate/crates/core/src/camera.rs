//! Pinhole camera: weak-perspective conversion and projection of wrist-frame
//! points. Square pixels, zero skew. Pixel `(i, j)` covers `[i, i+1) x [j, j+1)`.

use serde::{Deserialize, Serialize};

use crate::kinematics::RigidTransform;
use crate::{Error, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub principal_point: [f64; 2],
    pub image_size: [u32; 2],
}

impl Intrinsics {
    pub fn new(focal: f64, principal_point: [f64; 2], image_size: [u32; 2]) -> Result<Self> {
        let k = Self { focal, principal_point, image_size };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::InvalidCamera(format!("focal must be positive, got {}", self.focal)));
        }
        let [w, h] = self.image_size;
        let [cx, cy] = self.principal_point;
        if w == 0 || h == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }
        if !(cx >= 0.0 && cx <= w as f64 && cy >= 0.0 && cy <= h as f64) {
            return Err(Error::InvalidCamera("principal point must lie inside the image".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.image_size[0] as usize
    }

    pub fn height(&self) -> usize {
        self.image_size[1] as usize
    }
}

impl Default for Intrinsics {
    /// 480 px focal length, 224 x 224 image, centered principal point.
    fn default() -> Self {
        Self { focal: 480.0, principal_point: [112.0, 112.0], image_size: [224, 224] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakPerspective {
    pub scale: f64,
    pub translation_2d: [f64; 2],
}

/// Full-perspective camera: intrinsics plus the offset `(t_x, t_y, f/s)` (mm)
/// added to globally-posed points before projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CameraRepr", into = "CameraRepr")]
pub struct CameraRig {
    pub intrinsics: Intrinsics,
    pub depth_offset: Vec3,
}

#[derive(Serialize, Deserialize)]
struct CameraRepr {
    focal: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    offset: [f64; 3],
}

impl TryFrom<CameraRepr> for CameraRig {
    type Error = Error;

    fn try_from(r: CameraRepr) -> Result<Self> {
        CameraRig::new(Intrinsics::new(r.focal, [r.cx, r.cy], [r.width, r.height])?, Vec3::from(r.offset))
    }
}

impl From<CameraRig> for CameraRepr {
    fn from(c: CameraRig) -> Self {
        CameraRepr {
            focal: c.intrinsics.focal,
            cx: c.intrinsics.principal_point[0],
            cy: c.intrinsics.principal_point[1],
            width: c.intrinsics.image_size[0],
            height: c.intrinsics.image_size[1],
            offset: [c.depth_offset.x, c.depth_offset.y, c.depth_offset.z],
        }
    }
}

impl CameraRig {
    pub fn new(intrinsics: Intrinsics, depth_offset: Vec3) -> Result<Self> {
        intrinsics.validate()?;
        if !(depth_offset.iter().all(|v| v.is_finite()) && depth_offset.z > 0.0) {
            return Err(Error::InvalidCamera("depth offset must be finite with z > 0".into()));
        }
        Ok(Self { intrinsics, depth_offset })
    }

    /// Camera-frame coordinates of a wrist-frame point.
    pub fn to_camera(&self, global_pose: &RigidTransform, x: &Vec3) -> Vec3 {
        global_pose.apply(x) + self.depth_offset
    }

    /// Inverse of [`to_camera`](Self::to_camera).
    pub fn to_wrist(&self, global_pose: &RigidTransform, c: &Vec3) -> Vec3 {
        global_pose.inverse().apply(&(c - self.depth_offset))
    }

    /// Unit viewing direction (camera frame) through continuous pixel `(u, v)`.
    pub fn ray_direction(&self, pixel: [f64; 2]) -> Vec3 {
        let k = &self.intrinsics;
        Vec3::new(
            (pixel[0] - k.principal_point[0]) / k.focal,
            (pixel[1] - k.principal_point[1]) / k.focal,
            1.0,
        )
        .normalize()
    }

    /// Recovers the weak-perspective scale `f / offset.z`.
    pub fn weak_scale(&self) -> f64 {
        self.intrinsics.focal / self.depth_offset.z
    }
}

/// `depth_offset = (t_x, t_y, f / s)`; `(t_x, t_y)` is taken in millimeters.
pub fn weak_to_full(weak: &WeakPerspective, intrinsics: &Intrinsics) -> Result<CameraRig> {
    if !(weak.scale.is_finite() && weak.scale > 0.0) {
        return Err(Error::InvalidCamera(format!("weak-perspective scale must be positive, got {}", weak.scale)));
    }
    if !weak.translation_2d.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidCamera("weak-perspective translation must be finite".into()));
    }
    CameraRig::new(
        *intrinsics,
        Vec3::new(weak.translation_2d[0], weak.translation_2d[1], intrinsics.focal / weak.scale),
    )
}

/// `pi(x) = K [T_w x + offset]` followed by perspective division.
///
/// The result may fall outside the image; callers clamp.
pub fn project(rig: &CameraRig, global_pose: &RigidTransform, x: &Vec3) -> Result<[f64; 2]> {
    let c = rig.to_camera(global_pose, x);
    if !(c.z > 0.0) {
        return Err(Error::BehindCamera(c.z));
    }
    let k = &rig.intrinsics;
    Ok([
        k.focal * c.x / c.z + k.principal_point[0],
        k.focal * c.y / c.z + k.principal_point[1],
    ])
}
