//! Capsule-skinned kinematic hand.
//!
//! The skeleton has 16 frames: the wrist (frame 0) followed by 15 joints in
//! canonical order thumb, index, middle, ring, pinky, each finger listed
//! proximal to distal. Frame `1 + 3f + k` is joint `k` of finger `f`.
//!
//! Every joint carries a 3-scalar axis-angle rotation. The placement of a
//! joint in the wrist frame is `W_j = W_parent(j) * [R(theta_j) | t_j]`, so the
//! rotation at joint `j` moves everything distal to it while `j` itself sits
//! at the fixed offset `t_j` in its parent frame.
//!
//! The wrist frame has fingers along `+x`, the thumb on the `+y` side and the
//! palm facing `-z`; positive rotation about `+y` flexes a finger toward the
//! palm.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Mat3, Result, Vec3};

pub const NUM_FINGERS: usize = 5;
pub const NUM_JOINTS: usize = 15;
pub const NUM_FRAMES: usize = NUM_JOINTS + 1;
pub const ARTICULATION_DIM: usize = 3 * NUM_JOINTS;
pub const POSE_DIM: usize = ARTICULATION_DIM + 6;
/// 15 bones ending at each joint plus 5 fingertip bones.
pub const NUM_BONES: usize = NUM_JOINTS + NUM_FINGERS;

pub const FRAME_NAMES: [&str; NUM_FRAMES] = [
    "wrist", "thumb1", "thumb2", "thumb3", "index1", "index2", "index3", "middle1", "middle2",
    "middle3", "ring1", "ring2", "ring3", "pinky1", "pinky2", "pinky3",
];

const GOLDEN_FRACTION: f64 = 0.618_033_988_749_894_9;

/// Cross-product matrix `[v]x`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

// sin(t)/t, (1-cos t)/t^2 and their derivatives divided by t.
fn rodrigues_coefficients(t2: f64) -> (f64, f64, f64, f64) {
    if t2 < 1e-4 {
        let t4 = t2 * t2;
        (
            1.0 - t2 / 6.0 + t4 / 120.0,
            0.5 - t2 / 24.0 + t4 / 720.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0,
        )
    } else {
        let t = t2.sqrt();
        let (s, c) = t.sin_cos();
        (
            s / t,
            (1.0 - c) / t2,
            (t * c - s) / (t2 * t),
            (t * s - 2.0 * (1.0 - c)) / (t2 * t2),
        )
    }
}

/// Rotation matrix of an axis-angle vector (Rodrigues' formula).
pub fn rodrigues(w: &Vec3) -> Mat3 {
    let (a, b, _, _) = rodrigues_coefficients(w.norm_squared());
    let k = skew(w);
    Mat3::identity() + k * a + k * k * b
}

/// Partial derivatives of [`rodrigues`] with respect to each component of `w`.
pub fn rodrigues_derivatives(w: &Vec3) -> [Mat3; 3] {
    let (a, b, da, db) = rodrigues_coefficients(w.norm_squared());
    let k = skew(w);
    let k2 = k * k;
    std::array::from_fn(|i| {
        let e = skew(&Vec3::ith(i, 1.0));
        k * (da * w[i]) + e * a + k2 * (db * w[i]) + (e * k + k * e) * b
    })
}

/// Rigid transform `x -> R x + t` in millimeters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_axis_angle(axis_angle: &Vec3, translation: Vec3) -> Self {
        Self::new(rodrigues(axis_angle), translation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform::new(rt, -(rt * self.translation))
    }

    /// Orthonormal with determinant +1 within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let r = &self.rotation;
        (r.transpose() * r - Mat3::identity()).abs().max() <= tol
            && (r.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Generic kinematic tree; frame 0 is the root and parents precede children.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    parents: Vec<Option<usize>>,
    offsets: Vec<Vec3>,
}

impl Skeleton {
    pub fn new(parents: Vec<Option<usize>>, offsets: Vec<Vec3>) -> Result<Self> {
        if parents.is_empty() || parents.len() != offsets.len() {
            return Err(invalid("skeleton needs one parent entry and one offset per frame"));
        }
        if parents[0].is_some() {
            return Err(invalid("frame 0 must be the root"));
        }
        for (j, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < j => {}
                _ => return Err(invalid(format!("frame {j} needs a parent with a smaller index"))),
            }
        }
        if offsets.iter().any(|o| !o.iter().all(|v| v.is_finite())) {
            return Err(invalid("bone offsets must be finite"));
        }
        Ok(Self { parents, offsets })
    }

    pub fn num_frames(&self) -> usize {
        self.parents.len()
    }

    pub fn num_joints(&self) -> usize {
        self.parents.len() - 1
    }

    /// Articulation length: 3 scalars per non-root frame.
    pub fn dof(&self) -> usize {
        3 * self.num_joints()
    }

    pub fn parent(&self, frame: usize) -> Option<usize> {
        self.parents[frame]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn offset(&self, frame: usize) -> &Vec3 {
        &self.offsets[frame]
    }

    pub fn offsets(&self) -> &[Vec3] {
        &self.offsets
    }

    pub fn is_ancestor_or_self(&self, ancestor: usize, frame: usize) -> bool {
        let mut cur = Some(frame);
        while let Some(c) = cur {
            if c == ancestor {
                return true;
            }
            cur = self.parents[c];
        }
        false
    }

    fn check_articulation(&self, articulation: &[f64]) -> Result<()> {
        if articulation.len() != self.dof() {
            return Err(Error::Shape { expected: self.dof(), actual: articulation.len() });
        }
        if !articulation.iter().all(|v| v.is_finite()) {
            return Err(invalid("articulation must be finite"));
        }
        Ok(())
    }

    fn joint_axis_angle(articulation: &[f64], frame: usize) -> Vec3 {
        let i = 3 * (frame - 1);
        Vec3::new(articulation[i], articulation[i + 1], articulation[i + 2])
    }

    /// World placement (joint-to-wrist) of every frame.
    pub fn placements(&self, articulation: &[f64]) -> Result<Vec<RigidTransform>> {
        self.check_articulation(articulation)?;
        let mut out = Vec::with_capacity(self.num_frames());
        out.push(RigidTransform::identity());
        for j in 1..self.num_frames() {
            let local = RigidTransform::from_axis_angle(
                &Self::joint_axis_angle(articulation, j),
                self.offsets[j],
            );
            let parent = out[self.parents[j].unwrap()];
            out.push(parent.compose(&local));
        }
        Ok(out)
    }

    /// Wrist-to-joint transforms: the inverse of each frame's placement.
    pub fn forward_kinematics(&self, articulation: &[f64]) -> Result<Vec<RigidTransform>> {
        Ok(self.placements(articulation)?.iter().map(RigidTransform::inverse).collect())
    }

    pub fn joint_positions(&self, articulation: &[f64]) -> Result<Vec<Vec3>> {
        Ok(self.placements(articulation)?.iter().map(|t| t.translation).collect())
    }

    /// Placements plus the per-joint rotation derivatives needed for Jacobians.
    pub fn pose(&self, articulation: &[f64]) -> Result<PosedSkeleton<'_>> {
        let placements = self.placements(articulation)?;
        let mut local_derivatives = vec![[Mat3::zeros(); 3]];
        for j in 1..self.num_frames() {
            local_derivatives.push(rodrigues_derivatives(&Self::joint_axis_angle(articulation, j)));
        }
        Ok(PosedSkeleton { skeleton: self, placements, local_derivatives })
    }
}

/// A skeleton evaluated at one articulation.
#[derive(Clone, Debug)]
pub struct PosedSkeleton<'a> {
    skeleton: &'a Skeleton,
    placements: Vec<RigidTransform>,
    local_derivatives: Vec<[Mat3; 3]>,
}

impl PosedSkeleton<'_> {
    pub fn placements(&self) -> &[RigidTransform] {
        &self.placements
    }

    /// d(world point)/d(articulation) for a point rigidly attached to `frame`.
    ///
    /// Returns one column per articulation scalar.
    pub fn point_jacobian(&self, frame: usize, world: &Vec3) -> Vec<Vec3> {
        let mut cols = vec![Vec3::zeros(); self.skeleton.dof()];
        let mut k = frame;
        while let Some(parent) = self.skeleton.parent(k) {
            let placed = &self.placements[k];
            let local = placed.rotation.transpose() * (world - placed.translation);
            let parent_rot = &self.placements[parent].rotation;
            for (i, d) in self.local_derivatives[k].iter().enumerate() {
                cols[3 * (k - 1) + i] = parent_rot * (d * local);
            }
            k = parent;
        }
        cols
    }

    /// Jacobian of the stacked joint-local coordinates of a fixed wrist-frame
    /// point with respect to the articulation (`3J x 3J`).
    pub fn coords_jacobian(&self, x: &Vec3) -> DMatrix<f64> {
        let n = self.skeleton.num_joints();
        let mut jac = DMatrix::zeros(3 * n, 3 * n);
        for j in 1..=n {
            let rt = self.placements[j].rotation.transpose();
            // A point fixed in the wrist frame moves by -d(attached point) in joint j's frame.
            for (c, col) in self.point_jacobian(j, x).iter().enumerate() {
                if col.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let d = -(rt * col);
                for r in 0..3 {
                    jac[(3 * (j - 1) + r, c)] = d[r];
                }
            }
        }
        jac
    }
}

/// One capsule of the hand skin, rigidly attached to `frame`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bone {
    pub frame: usize,
    pub start: Vec3,
    pub end: Vec3,
    pub radius: f64,
    pub contact: bool,
}

/// A hand-surface sample expressed in the local coordinates of its bone frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceTemplate {
    pub bone: usize,
    pub frame: usize,
    pub local: Vec3,
}

/// A posed hand-surface sample in the wrist frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfacePoint {
    pub position: Vec3,
    pub bone: usize,
}

/// Fixed-topology capsule hand: 15-joint skeleton, fingertip offsets, and
/// one capsule per bone.
///
/// Bone `b < 15` runs from the parent of joint `b + 1` to that joint; bone
/// `15 + f` runs from the distal joint of finger `f` to its fingertip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HandModelRepr", into = "HandModelRepr")]
pub struct HandModel {
    skeleton: Skeleton,
    tip_offsets: Vec<Vec3>,
    capsule_radii: Vec<f64>,
    contact_labels: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct HandModelRepr {
    joint_names: Vec<String>,
    joint_parents: Vec<Option<usize>>,
    bone_offsets: Vec<[f64; 3]>,
    tip_offsets: Vec<[f64; 3]>,
    capsule_radii: Vec<f64>,
    contact_labels: Vec<bool>,
}

impl TryFrom<HandModelRepr> for HandModel {
    type Error = Error;

    fn try_from(r: HandModelRepr) -> Result<Self> {
        let skeleton = Skeleton::new(
            r.joint_parents,
            r.bone_offsets.iter().map(|o| Vec3::from(*o)).collect(),
        )?;
        HandModel::new(
            skeleton,
            r.tip_offsets.iter().map(|o| Vec3::from(*o)).collect(),
            r.capsule_radii,
            r.contact_labels,
        )
    }
}

impl From<HandModel> for HandModelRepr {
    fn from(m: HandModel) -> Self {
        HandModelRepr {
            joint_names: FRAME_NAMES.iter().map(|s| s.to_string()).collect(),
            joint_parents: m.skeleton.parents.clone(),
            bone_offsets: m.skeleton.offsets.iter().map(|o| [o.x, o.y, o.z]).collect(),
            tip_offsets: m.tip_offsets.iter().map(|o| [o.x, o.y, o.z]).collect(),
            capsule_radii: m.capsule_radii,
            contact_labels: m.contact_labels,
        }
    }
}

/// Frame index of joint `k` (0 proximal .. 2 distal) of finger `f`.
pub const fn finger_frame(finger: usize, k: usize) -> usize {
    1 + 3 * finger + k
}

impl HandModel {
    pub fn new(
        skeleton: Skeleton,
        tip_offsets: Vec<Vec3>,
        capsule_radii: Vec<f64>,
        contact_labels: Vec<bool>,
    ) -> Result<Self> {
        if skeleton.num_joints() != NUM_JOINTS {
            return Err(invalid(format!(
                "hand skeleton needs exactly {NUM_JOINTS} joints, got {}",
                skeleton.num_joints()
            )));
        }
        for f in 0..NUM_FINGERS {
            for k in 0..3 {
                let expected = if k == 0 { 0 } else { finger_frame(f, k - 1) };
                if skeleton.parent(finger_frame(f, k)) != Some(expected) {
                    return Err(invalid("hand skeleton must follow the canonical finger chains"));
                }
            }
        }
        if tip_offsets.len() != NUM_FINGERS || !tip_offsets.iter().all(|o| o.iter().all(|v| v.is_finite())) {
            return Err(invalid("need 5 finite fingertip offsets"));
        }
        if capsule_radii.len() != NUM_BONES || !capsule_radii.iter().all(|r| r.is_finite() && *r > 0.0) {
            return Err(invalid("need 20 positive finite capsule radii"));
        }
        if contact_labels.len() != NUM_BONES {
            return Err(invalid("need 20 contact labels"));
        }
        Ok(Self { skeleton, tip_offsets, capsule_radii, contact_labels })
    }

    /// Average adult proportions, millimeters.
    pub fn default_adult() -> Self {
        // (knuckle offset from wrist, phalanx lengths, radii per bone incl. tip)
        let fingers: [([f64; 3], [f64; 3], f64, [f64; 4]); NUM_FINGERS] = [
            ([22.0, 18.0, -8.0], [33.0, 28.0, 22.0], 0.62, [11.0, 10.0, 9.0, 8.0]),
            ([92.0, 22.0, 0.0], [40.0, 24.0, 20.0], 0.0, [11.0, 9.0, 8.0, 7.5]),
            ([95.0, 0.0, 0.0], [44.0, 28.0, 22.0], 0.0, [11.0, 9.0, 8.0, 7.5]),
            ([90.0, -20.0, 0.0], [41.0, 27.0, 21.0], 0.0, [11.0, 8.5, 7.5, 7.0]),
            ([82.0, -38.0, 0.0], [32.0, 20.0, 19.0], 0.0, [10.0, 8.0, 7.0, 6.5]),
        ];
        let mut parents = vec![None];
        let mut offsets = vec![Vec3::zeros()];
        let mut radii = vec![0.0; NUM_BONES];
        let mut contact = vec![false; NUM_BONES];
        let mut tips = Vec::new();
        for (f, (knuckle, lengths, spread, r)) in fingers.iter().enumerate() {
            // Thumb phalanges splay toward +y.
            let dir = Vec3::new(spread.cos(), spread.sin(), 0.0);
            parents.push(Some(0));
            offsets.push(Vec3::from(*knuckle));
            parents.push(Some(finger_frame(f, 0)));
            offsets.push(dir * lengths[0]);
            parents.push(Some(finger_frame(f, 1)));
            offsets.push(dir * lengths[1]);
            tips.push(dir * lengths[2]);
            for k in 0..3 {
                radii[3 * f + k] = r[k];
            }
            radii[NUM_JOINTS + f] = r[3];
            contact[3 * f + 2] = true;
            contact[NUM_JOINTS + f] = true;
        }
        let skeleton = Skeleton::new(parents, offsets).expect("default skeleton is valid");
        Self::new(skeleton, tips, radii, contact).expect("default hand is valid")
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn tip_offsets(&self) -> &[Vec3] {
        &self.tip_offsets
    }

    pub fn capsule_radii(&self) -> &[f64] {
        &self.capsule_radii
    }

    pub fn contact_labels(&self) -> &[bool] {
        &self.contact_labels
    }

    pub fn bones(&self) -> Vec<Bone> {
        let mut bones = Vec::with_capacity(NUM_BONES);
        for j in 1..NUM_FRAMES {
            bones.push(Bone {
                frame: self.skeleton.parent(j).unwrap(),
                start: Vec3::zeros(),
                end: *self.skeleton.offset(j),
                radius: self.capsule_radii[j - 1],
                contact: self.contact_labels[j - 1],
            });
        }
        for f in 0..NUM_FINGERS {
            bones.push(Bone {
                frame: finger_frame(f, 2),
                start: Vec3::zeros(),
                end: self.tip_offsets[f],
                radius: self.capsule_radii[NUM_JOINTS + f],
                contact: self.contact_labels[NUM_JOINTS + f],
            });
        }
        bones
    }

    /// Posed fingertip positions in the wrist frame.
    pub fn fingertips(&self, articulation: &[f64]) -> Result<Vec<Vec3>> {
        let placements = self.skeleton.placements(articulation)?;
        Ok((0..NUM_FINGERS)
            .map(|f| placements[finger_frame(f, 2)].apply(&self.tip_offsets[f]))
            .collect())
    }

    /// Articulation-independent surface samples, `per_bone` on every capsule.
    pub fn surface_templates(&self, per_bone: usize) -> Result<Vec<SurfaceTemplate>> {
        if per_bone == 0 {
            return Err(invalid("samples_per_bone must be at least 1"));
        }
        let mut out = Vec::with_capacity(per_bone * NUM_BONES);
        for (b, bone) in self.bones().iter().enumerate() {
            for i in 0..per_bone {
                out.push(SurfaceTemplate {
                    bone: b,
                    frame: bone.frame,
                    local: capsule_surface_point(&bone.start, &bone.end, bone.radius, i, per_bone),
                });
            }
        }
        Ok(out)
    }
}

impl Default for HandModel {
    fn default() -> Self {
        Self::default_adult()
    }
}

/// Two unit vectors completing `u` to a right-handed orthonormal basis.
pub(crate) fn orthonormal_basis(u: &Vec3) -> (Vec3, Vec3) {
    let helper = if u.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let v = u.cross(&helper).normalize();
    let w = u.cross(&v);
    (v, w)
}

/// `i`-th of `n` area-stratified samples on the capsule around segment `a`-`b`.
fn capsule_surface_point(a: &Vec3, b: &Vec3, radius: f64, i: usize, n: usize) -> Vec3 {
    let axis = b - a;
    let len = axis.norm();
    let u = if len > 0.0 { axis / len } else { Vec3::x() };
    let (v, w) = orthonormal_basis(&u);
    let cap = 2.0 * PI * radius * radius;
    let side = 2.0 * PI * radius * len;
    let s = (i as f64 + 0.5) / n as f64 * (2.0 * cap + side);
    let phi = 2.0 * PI * (i as f64 * GOLDEN_FRACTION).fract();
    let ring = v * phi.cos() + w * phi.sin();
    if s < cap {
        let c = 1.0 - s / cap;
        a + (-u * c + ring * (1.0 - c * c).max(0.0).sqrt()) * radius
    } else if s < cap + side {
        a + u * ((s - cap) / side * len) + ring * radius
    } else {
        let c = (s - cap - side) / cap;
        b + (u * c + ring * (1.0 - c * c).max(0.0).sqrt()) * radius
    }
}

/// Articulation plus global rigid pose.
///
/// Serialized as a flat 51-scalar array: 45 articulation entries in canonical
/// joint order, then the 3 global axis-angle entries, then the 3 global
/// translation entries (mm).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct HandPose {
    pub articulation: [f64; ARTICULATION_DIM],
    pub global_rotation: Vec3,
    pub global_translation: Vec3,
}

impl HandPose {
    pub fn zero() -> Self {
        Self::from_articulation([0.0; ARTICULATION_DIM])
    }

    pub fn from_articulation(articulation: [f64; ARTICULATION_DIM]) -> Self {
        Self { articulation, global_rotation: Vec3::zeros(), global_translation: Vec3::zeros() }
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() != POSE_DIM {
            return Err(Error::Shape { expected: POSE_DIM, actual: values.len() });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(invalid("pose entries must be finite"));
        }
        let mut articulation = [0.0; ARTICULATION_DIM];
        articulation.copy_from_slice(&values[..ARTICULATION_DIM]);
        Ok(Self {
            articulation,
            global_rotation: Vec3::from_column_slice(&values[45..48]),
            global_translation: Vec3::from_column_slice(&values[48..51]),
        })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.articulation.to_vec();
        v.extend(self.global_rotation.iter());
        v.extend(self.global_translation.iter());
        v
    }

    pub fn global_transform(&self) -> RigidTransform {
        RigidTransform::from_axis_angle(&self.global_rotation, self.global_translation)
    }

    /// Every joint's axis-angle magnitude is below pi.
    pub fn is_canonical(&self) -> bool {
        self.articulation
            .chunks(3)
            .all(|c| Vec3::new(c[0], c[1], c[2]).norm() < PI)
    }
}

impl TryFrom<Vec<f64>> for HandPose {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        HandPose::from_slice(&v)
    }
}

impl From<HandPose> for Vec<f64> {
    fn from(p: HandPose) -> Self {
        p.to_vec()
    }
}

/// Wrist-to-joint transforms for all 16 frames (root is identity).
pub fn forward_kinematics(model: &HandModel, articulation: &[f64]) -> Result<Vec<RigidTransform>> {
    model.skeleton.forward_kinematics(articulation)
}

/// Stacked coordinates of wrist-frame point `x` in each of the 15 joint
/// frames, given precomputed wrist-to-joint transforms.
pub fn joint_coords_with(wrist_to_joint: &[RigidTransform], x: &Vec3, out: &mut [f64]) {
    for (j, t) in wrist_to_joint.iter().skip(1).enumerate() {
        let q = t.apply(x);
        out[3 * j..3 * j + 3].copy_from_slice(q.as_slice());
    }
}

/// `T(theta_A) x`: the 45 joint-local coordinates of a wrist-frame point.
pub fn wrist_to_joint_coords(model: &HandModel, articulation: &[f64], x: &Vec3) -> Result<Vec<f64>> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(invalid("query point must be finite"));
    }
    let fk = forward_kinematics(model, articulation)?;
    let mut out = vec![0.0; ARTICULATION_DIM];
    joint_coords_with(&fk, x, &mut out);
    Ok(out)
}

/// Jacobian of [`wrist_to_joint_coords`] with respect to the articulation.
pub fn wrist_to_joint_coords_jacobian(
    model: &HandModel,
    articulation: &[f64],
    x: &Vec3,
) -> Result<DMatrix<f64>> {
    if !x.iter().all(|v| v.is_finite()) {
        return Err(invalid("query point must be finite"));
    }
    Ok(model.skeleton.pose(articulation)?.coords_jacobian(x))
}

/// Posed capsule-surface samples in the wrist frame.
pub fn hand_surface_points(
    model: &HandModel,
    articulation: &[f64],
    samples_per_bone: usize,
) -> Result<Vec<SurfacePoint>> {
    let placements = model.skeleton.placements(articulation)?;
    Ok(model
        .surface_templates(samples_per_bone)?
        .iter()
        .map(|t| SurfacePoint { position: placements[t.frame].apply(&t.local), bone: t.bone })
        .collect())
}

/// Adds N(0, sigma^2) noise to every articulation entry, clamped to [-pi, pi].
/// The global pose is untouched.
pub fn pose_jitter(pose: &HandPose, sigma: f64, seed: u64) -> HandPose {
    if sigma <= 0.0 || !sigma.is_finite() {
        return pose.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is positive and finite");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = pose.clone();
    for v in out.articulation.iter_mut() {
        *v = (*v + normal.sample(&mut rng)).clamp(-PI, PI);
    }
    out
}
