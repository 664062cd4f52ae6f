//! Reconstruction and hand-pose metrics.
//!
//! Chamfer distance is the symmetric mean of squared nearest-neighbour
//! distances, in mm^2. Intersection volume is in cm^3; EPE in mm.

mod kdtree;

use serde::{Deserialize, Serialize};

pub use kdtree::KdTree;

use crate::error::invalid;
use crate::kinematics::{HandModel, HandPose, Skeleton};
use crate::mesh::Mesh;
use crate::par::{self, Execution};
use crate::{Aabb, Result, Vec3};

pub const CHAMFER_CONVENTION: &str = "symmetric mean of squared nearest-neighbour distances, mm^2";

/// Squared distance from every point of `from` to its nearest point in `to`.
pub fn nearest_squared(from: &[Vec3], to: &[Vec3], exec: Execution) -> Vec<f64> {
    let tree = KdTree::new(to);
    par::map_slice(exec, from, |p| tree.nearest(p).map_or(f64::INFINITY, |(_, d)| d))
}

fn non_empty(a: &[Vec3], b: &[Vec3]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(invalid("point sets must be non-empty"));
    }
    Ok(())
}

pub fn chamfer_distance(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    non_empty(a, b)?;
    let exec = Execution::default();
    let ab: f64 = nearest_squared(a, b, exec).iter().sum::<f64>() / a.len() as f64;
    let ba: f64 = nearest_squared(b, a, exec).iter().sum::<f64>() / b.len() as f64;
    Ok(ab + ba)
}

/// `(precision, recall)` at `threshold` mm: a point matches when its
/// nearest neighbour lies within the threshold (inclusive).
pub fn precision_recall(pred: &[Vec3], gt: &[Vec3], threshold: f64) -> Result<(f64, f64)> {
    non_empty(pred, gt)?;
    if !(threshold > 0.0) {
        return Err(invalid("f-score threshold must be positive"));
    }
    let t2 = threshold * threshold;
    let exec = Execution::default();
    let frac = |d: Vec<f64>| d.iter().filter(|v| **v <= t2).count() as f64 / d.len() as f64;
    Ok((frac(nearest_squared(pred, gt, exec)), frac(nearest_squared(gt, pred, exec))))
}

pub fn f_score(pred: &[Vec3], gt: &[Vec3], threshold: f64) -> Result<f64> {
    let (p, r) = precision_recall(pred, gt, threshold)?;
    Ok(if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) })
}

/// Voxelized overlap of two closed meshes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntersectionVolume {
    pub volume_cm3: f64,
    pub voxels: u64,
    /// False when either mesh is not watertight.
    pub closed: bool,
}

struct RowCrossings {
    // (x, +1 leaving / -1 entering), sorted by x
    hits: Vec<(f64, i32)>,
}

impl RowCrossings {
    /// Winding number of the point at `x` on this row.
    fn inside_flags(&self, xs: &[f64]) -> Vec<bool> {
        // Suffix sums over crossings strictly to the right.
        let mut out = vec![false; xs.len()];
        let mut k = self.hits.len();
        let mut sum = 0;
        for (i, x) in xs.iter().enumerate().rev() {
            while k > 0 && self.hits[k - 1].0 > *x {
                k -= 1;
                sum += self.hits[k].1;
            }
            out[i] = sum > 0;
        }
        out
    }
}

struct RayCaster<'a> {
    mesh: &'a Mesh,
    bins: Vec<Vec<u32>>,
    lo: [f64; 2],
    cell: [f64; 2],
    dims: [usize; 2],
}

impl<'a> RayCaster<'a> {
    fn new(mesh: &'a Mesh, region: &Aabb) -> Self {
        let dims = [64usize, 64];
        let lo = [region.min.y, region.min.z];
        let cell = [(region.max.y - region.min.y) / dims[0] as f64, (region.max.z - region.min.z) / dims[1] as f64];
        let mut bins = vec![Vec::new(); dims[0] * dims[1]];
        let bin = |v: f64, a: usize| (((v - lo[a]) / cell[a]).floor().max(0.0) as usize).min(dims[a] - 1);
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let p = tri.map(|i| mesh.vertices[i as usize]);
            let (ymin, ymax) = (p[0].y.min(p[1].y).min(p[2].y), p[0].y.max(p[1].y).max(p[2].y));
            let (zmin, zmax) = (p[0].z.min(p[1].z).min(p[2].z), p[0].z.max(p[1].z).max(p[2].z));
            if ymax < region.min.y || ymin > region.max.y || zmax < region.min.z || zmin > region.max.z {
                continue;
            }
            for by in bin(ymin, 0)..=bin(ymax, 0) {
                for bz in bin(zmin, 1)..=bin(zmax, 1) {
                    bins[by * dims[1] + bz].push(t as u32);
                }
            }
        }
        Self { mesh, bins, lo, cell, dims }
    }

    fn row(&self, y: f64, z: f64) -> RowCrossings {
        let by = (((y - self.lo[0]) / self.cell[0]).floor().max(0.0) as usize).min(self.dims[0] - 1);
        let bz = (((z - self.lo[1]) / self.cell[1]).floor().max(0.0) as usize).min(self.dims[1] - 1);
        let mut hits = Vec::new();
        for &t in &self.bins[by * self.dims[1] + bz] {
            let [a, b, c] = self.mesh.triangles[t as usize].map(|i| self.mesh.vertices[i as usize]);
            // Edge functions of the (y, z) projection.
            let e = |p: &Vec3, q: &Vec3| (q.y - p.y) * (z - p.z) - (q.z - p.z) * (y - p.y);
            let (w0, w1, w2) = (e(&b, &c), e(&c, &a), e(&a, &b));
            let area = w0 + w1 + w2;
            if area == 0.0 {
                continue;
            }
            let inside = (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0) || (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0);
            if !inside {
                continue;
            }
            let x = (w0 * a.x + w1 * b.x + w2 * c.x) / area;
            // Normal x-component sign equals the sign of the projected area.
            hits.push((x, if area > 0.0 { 1 } else { -1 }));
        }
        hits.sort_by(|p, q| p.0.total_cmp(&q.0));
        RowCrossings { hits }
    }
}

/// Volume inside both meshes (cm^3), sampled at voxel centres over the
/// overlap of their bounding boxes.
pub fn intersection_volume(a: &Mesh, b: &Mesh, voxel: f64) -> Result<IntersectionVolume> {
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(invalid("voxel size must be positive"));
    }
    let closed = a.is_watertight() && b.is_watertight();
    if !closed {
        log::warn!("intersection_volume: a mesh is not watertight; result is approximate");
    }
    let Some(region) = (!a.is_empty() && !b.is_empty()).then(|| a.bounds().intersection(&b.bounds())).flatten() else {
        return Ok(IntersectionVolume { volume_cm3: 0.0, voxels: 0, closed });
    };
    let n = region.extent().map(|e| ((e / voxel).ceil() as usize).max(1));
    // Offsets keep sample rays off mesh edges and vertices on axis-aligned inputs.
    let jitter = Vec3::new(0.0, voxel * 1e-6 * std::f64::consts::SQRT_2, voxel * 1e-6 * 3f64.sqrt());
    let center = |i: usize, a: usize| region.min[a] + (i as f64 + 0.5) * voxel + jitter[a];
    let ca = RayCaster::new(a, &region);
    let cb = RayCaster::new(b, &region);
    let xs: Vec<f64> = (0..n.x).map(|i| center(i, 0)).collect();
    let counts = par::map_range(Execution::default(), n.y * n.z, |r| {
        let (y, z) = (center(r % n.y, 1), center(r / n.y, 2));
        let ia = ca.row(y, z).inside_flags(&xs);
        let ib = cb.row(y, z).inside_flags(&xs);
        ia.iter().zip(&ib).filter(|(p, q)| **p && **q).count() as u64
    });
    let voxels: u64 = counts.iter().sum();
    Ok(IntersectionVolume { volume_cm3: voxels as f64 * voxel.powi(3) / 1000.0, voxels, closed })
}

/// Mean joint-position distance (mm) over every non-root frame.
pub fn skeleton_end_point_error(skeleton: &Skeleton, a: &[f64], b: &[f64]) -> Result<f64> {
    let pa = skeleton.joint_positions(a)?;
    let pb = skeleton.joint_positions(b)?;
    let n = pa.len() - 1;
    Ok(pa.iter().zip(&pb).skip(1).map(|(p, q)| (p - q).norm()).sum::<f64>() / n as f64)
}

/// EPE over the 15 articulated joints in the wrist frame; the global pose is ignored.
pub fn end_point_error(a: &HandPose, b: &HandPose, model: &HandModel) -> Result<f64> {
    skeleton_end_point_error(model.skeleton(), &a.articulation, &b.articulation)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricOptions {
    pub num_points: usize,
    pub seed: u64,
    pub thresholds: [f64; 2],
    pub voxel: f64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { num_points: 10_000, seed: 0, thresholds: [5.0, 10.0], voxel: 1.0 }
    }
}

/// Self-describing metric bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub chamfer: f64,
    pub chamfer_convention: String,
    pub f5: f64,
    pub f10: f64,
    pub thresholds_mm: [f64; 2],
    pub num_points: usize,
    pub seed: u64,
    pub intersection_volume_cm3: Option<f64>,
    pub voxel_mm: Option<f64>,
    pub epe_mm: Option<f64>,
}

/// Chamfer and F-scores between surface samples of two meshes. An empty
/// prediction scores zero and infinite Chamfer.
pub fn compare_meshes(pred: &Mesh, gt: &Mesh, opts: &MetricOptions) -> Result<MetricReport> {
    let gt_pts = gt.sample_surface(opts.num_points, opts.seed);
    if gt_pts.is_empty() {
        return Err(invalid("ground-truth mesh has no area"));
    }
    let pred_pts = pred.sample_surface(opts.num_points, opts.seed.wrapping_add(1));
    let (chamfer, f5, f10) = if pred_pts.is_empty() {
        (f64::INFINITY, 0.0, 0.0)
    } else {
        (
            chamfer_distance(&pred_pts, &gt_pts)?,
            f_score(&pred_pts, &gt_pts, opts.thresholds[0])?,
            f_score(&pred_pts, &gt_pts, opts.thresholds[1])?,
        )
    };
    Ok(MetricReport {
        chamfer,
        chamfer_convention: CHAMFER_CONVENTION.into(),
        f5,
        f10,
        thresholds_mm: opts.thresholds,
        num_points: opts.num_points,
        seed: opts.seed,
        intersection_volume_cm3: None,
        voxel_mm: None,
        epe_mm: None,
    })
}
