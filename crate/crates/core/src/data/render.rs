use crate::camera::CameraRig;
use crate::field::{AnalyticSdf, FeatureImage, SdfField};
use crate::kinematics::RigidTransform;
use crate::par::{map_range, Execution};
use crate::Result;

/// Channel 0: 1 on the object, 0.5 on the hand, 0 elsewhere.
pub const MASK_CHANNEL: usize = 0;
/// Channel 1: `(z_camera - offset_z) / 100`, or [`BACKGROUND_DEPTH`].
pub const DEPTH_CHANNEL: usize = 1;
pub const IMAGE_CHANNELS: usize = 2;
pub const BACKGROUND_DEPTH: f32 = 2.0;

const HIT_EPS: f64 = 0.05;
const MAX_STEPS: usize = 256;
/// Scene content is assumed to lie within this distance (mm) of the wrist.
const SCENE_RADIUS: f64 = 300.0;

/// Sphere-traces the union of `object` and `hand` (both in the wrist frame)
/// through every pixel center.
pub fn render_mask_depth(
    object: &AnalyticSdf,
    hand: &AnalyticSdf,
    global: &RigidTransform,
    camera: &CameraRig,
    exec: Execution,
) -> Result<FeatureImage> {
    let (w, h) = (camera.intrinsics.width(), camera.intrinsics.height());
    let inv = global.inverse();
    let z0 = camera.depth_offset.z;
    let (t_min, t_max) = ((z0 - SCENE_RADIUS).max(1e-3), z0 + SCENE_RADIUS);
    let rows = map_range(exec, h, |y| {
        let mut row = Vec::with_capacity(w * IMAGE_CHANNELS);
        for x in 0..w {
            let d = camera.ray_direction([x as f64 + 0.5, y as f64 + 0.5]);
            let mut t = t_min / d.z;
            let mut hit = None;
            for _ in 0..MAX_STEPS {
                let c = d * t;
                if c.z > t_max {
                    break;
                }
                let p = inv.apply(&(c - camera.depth_offset));
                let (fo, fh) = (object.eval(&p), hand.eval(&p));
                let f = fo.min(fh);
                if f < HIT_EPS {
                    hit = Some((c.z, fo <= fh));
                    break;
                }
                t += f;
            }
            match hit {
                Some((z, on_object)) => {
                    row.push(if on_object { 1.0 } else { 0.5 });
                    row.push(((z - z0) / 100.0) as f32);
                }
                None => {
                    row.push(0.0);
                    row.push(BACKGROUND_DEPTH);
                }
            }
        }
        row
    });
    FeatureImage::new(w, h, IMAGE_CHANNELS, rows.concat())
}
