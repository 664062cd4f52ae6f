use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SdfField;
use crate::error::invalid;
use crate::kinematics::{orthonormal_basis, rodrigues, HandModel};
use crate::mesh::Mesh;
use crate::{Aabb, Error, Mat3, Result, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    Sphere,
    Box,
    Capsule,
    Cylinder,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 4] =
        [PrimitiveKind::Sphere, PrimitiveKind::Box, PrimitiveKind::Capsule, PrimitiveKind::Cylinder];

    pub fn name(&self) -> &'static str {
        match self {
            PrimitiveKind::Sphere => "sphere",
            PrimitiveKind::Box => "box",
            PrimitiveKind::Capsule => "capsule",
            PrimitiveKind::Cylinder => "cylinder",
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrimitiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrimitiveKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| invalid(format!("unknown primitive kind '{s}'")))
    }
}

/// Closed-form primitive, millimeters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere { center: Vec3, radius: f64 },
    /// `rotation` is an axis-angle taking box-local axes to the wrist frame.
    Box { center: Vec3, half_extents: Vec3, rotation: Vec3 },
    Capsule { a: Vec3, b: Vec3, radius: f64 },
    /// `axis` need not be normalized.
    Cylinder { center: Vec3, axis: Vec3, half_height: f64, radius: f64 },
}

fn segment_closest(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

impl Primitive {
    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Primitive::Sphere { .. } => PrimitiveKind::Sphere,
            Primitive::Box { .. } => PrimitiveKind::Box,
            Primitive::Capsule { .. } => PrimitiveKind::Capsule,
            Primitive::Cylinder { .. } => PrimitiveKind::Cylinder,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Primitive::Sphere { center, radius } => finite(center) && *radius > 0.0,
            Primitive::Box { center, half_extents, rotation } => {
                finite(center) && finite(rotation) && half_extents.iter().all(|h| *h > 0.0 && h.is_finite())
            }
            Primitive::Capsule { a, b, radius } => finite(a) && finite(b) && *radius > 0.0,
            Primitive::Cylinder { center, axis, half_height, radius } => {
                finite(center) && finite(axis) && axis.norm() > 0.0 && *half_height > 0.0 && *radius > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("invalid {} parameters", self.kind())))
        }
    }

    /// Rotation taking local coordinates (symmetry axis = local z) to the wrist frame.
    fn frame(&self) -> (Vec3, Mat3) {
        let axis_frame = |u: Vec3| {
            let (v, w) = orthonormal_basis(&u);
            Mat3::from_columns(&[v, w, u])
        };
        match self {
            Primitive::Sphere { center, .. } => (*center, Mat3::identity()),
            Primitive::Box { center, rotation, .. } => (*center, rodrigues(rotation)),
            Primitive::Capsule { a, b, .. } => {
                let d = b - a;
                let u = if d.norm() > 0.0 { d.normalize() } else { Vec3::z() };
                ((a + b) * 0.5, axis_frame(u))
            }
            Primitive::Cylinder { center, axis, .. } => (*center, axis_frame(axis.normalize())),
        }
    }

    /// Exact signed distance.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            Primitive::Sphere { center, radius } => (p - center).norm() - radius,
            Primitive::Box { center, half_extents, rotation } => {
                let local = rodrigues(rotation).transpose() * (p - center);
                let q = local.abs() - half_extents;
                q.sup(&Vec3::zeros()).norm() + q.max().min(0.0)
            }
            Primitive::Capsule { a, b, radius } => (p - segment_closest(p, a, b)).norm() - radius,
            Primitive::Cylinder { center, axis, half_height, radius } => {
                let u = axis.normalize();
                let d = p - center;
                let h = d.dot(&u);
                let r = (d - u * h).norm();
                let q = [r - radius, h.abs() - half_height];
                let outside = (q[0].max(0.0).powi(2) + q[1].max(0.0).powi(2)).sqrt();
                outside + q[0].max(q[1]).min(0.0)
            }
        }
    }

    /// Membership test written independently of [`sdf`](Self::sdf).
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            Primitive::Sphere { center, radius } => (p - center).norm_squared() < radius * radius,
            Primitive::Box { center, half_extents, rotation } => {
                let local = rodrigues(rotation).transpose() * (p - center);
                (0..3).all(|i| local[i].abs() < half_extents[i])
            }
            Primitive::Capsule { a, b, radius } => {
                (p - segment_closest(p, a, b)).norm_squared() < radius * radius
            }
            Primitive::Cylinder { center, axis, half_height, radius } => {
                let u = axis.normalize();
                let d = p - center;
                let h = d.dot(&u);
                h.abs() < *half_height && (d - u * h).norm_squared() < radius * radius
            }
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Primitive::Sphere { radius, .. } => 4.0 / 3.0 * PI * radius.powi(3),
            Primitive::Box { half_extents, .. } => 8.0 * half_extents.x * half_extents.y * half_extents.z,
            Primitive::Capsule { a, b, radius } => {
                PI * radius * radius * (b - a).norm() + 4.0 / 3.0 * PI * radius.powi(3)
            }
            Primitive::Cylinder { half_height, radius, .. } => PI * radius * radius * 2.0 * half_height,
        }
    }

    pub fn bounds(&self) -> Aabb {
        match self {
            Primitive::Sphere { center, radius } => Aabb::new(center.add_scalar(-radius), center.add_scalar(*radius)),
            Primitive::Box { center, half_extents, rotation } => {
                let r = rodrigues(rotation);
                let ext = r.abs() * half_extents;
                Aabb::new(center - ext, center + ext)
            }
            Primitive::Capsule { a, b, radius } => Aabb::new(a.inf(b).add_scalar(-radius), a.sup(b).add_scalar(*radius)),
            Primitive::Cylinder { center, axis, half_height, radius } => {
                let u = axis.normalize();
                // Disc extent along each world axis is radius * sqrt(1 - u_i^2).
                let ext = Vec3::from_fn(|i, _| u[i].abs() * half_height + radius * (1.0 - u[i] * u[i]).max(0.0).sqrt());
                Aabb::new(center - ext, center + ext)
            }
        }
    }

    /// Largest dimension of the bounding box.
    pub fn extent(&self) -> f64 {
        self.bounds().extent().max()
    }

    /// Outward-oriented closed triangulation whose chords deviate from the
    /// true surface by at most `tolerance` mm.
    pub fn triangulate(&self, tolerance: f64) -> Mesh {
        let segments = |r: f64, span: f64| {
            let ratio = (1.0 - tolerance / r).clamp(-1.0, 1.0);
            let delta = 2.0 * ratio.acos();
            ((span / delta).ceil() as usize).max(4)
        };
        let (center, frame) = self.frame();
        let (profile, n_around) = match self {
            Primitive::Box { half_extents, .. } => return box_mesh(half_extents, &center, &frame),
            Primitive::Sphere { radius, .. } => {
                let n_lat = segments(*radius, PI);
                let profile = (0..=n_lat)
                    .map(|k| {
                        let t = PI * k as f64 / n_lat as f64;
                        (radius * t.sin(), -radius * t.cos())
                    })
                    .collect::<Vec<_>>();
                (profile, segments(*radius, 2.0 * PI))
            }
            Primitive::Capsule { a, b, radius } => {
                let half = 0.5 * (b - a).norm();
                let n_cap = segments(*radius, PI / 2.0);
                let mut profile = Vec::new();
                for k in 0..=n_cap {
                    let t = PI / 2.0 * k as f64 / n_cap as f64;
                    profile.push((radius * t.sin(), -half - radius * t.cos()));
                }
                for k in 0..=n_cap {
                    let t = PI / 2.0 + PI / 2.0 * k as f64 / n_cap as f64;
                    profile.push((radius * t.sin(), half - radius * t.cos()));
                }
                (profile, segments(*radius, 2.0 * PI))
            }
            Primitive::Cylinder { half_height, radius, .. } => (
                vec![(0.0, -half_height), (*radius, -half_height), (*radius, *half_height), (0.0, *half_height)],
                segments(*radius, 2.0 * PI),
            ),
        };
        revolve(&profile, n_around, &center, &frame)
    }
}

fn finite(v: &Vec3) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn box_mesh(h: &Vec3, center: &Vec3, frame: &Mat3) -> Mesh {
    let corners = [
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ];
    let vertices = corners
        .iter()
        .map(|c| center + frame * Vec3::new(c[0] * h.x, c[1] * h.y, c[2] * h.z))
        .collect();
    let triangles = vec![
        [0, 3, 2], [0, 2, 1], // -z
        [4, 5, 6], [4, 6, 7], // +z
        [0, 1, 5], [0, 5, 4], // -y
        [3, 7, 6], [3, 6, 2], // +y
        [0, 4, 7], [0, 7, 3], // -x
        [1, 2, 6], [1, 6, 5], // +x
    ];
    Mesh::new(vertices, triangles)
}

/// Surface of revolution about local z. `profile` runs bottom to top as
/// `(radius, height)` and must start and end on the axis.
fn revolve(profile: &[(f64, f64)], n: usize, center: &Vec3, frame: &Mat3) -> Mesh {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let place = |r: f64, z: f64, phi: f64| center + frame * Vec3::new(r * phi.cos(), r * phi.sin(), z);
    let bottom = 0u32;
    vertices.push(place(0.0, profile[0].1, 0.0));
    let mut rings = Vec::new();
    for &(r, z) in &profile[1..profile.len() - 1] {
        let start = vertices.len() as u32;
        for j in 0..n {
            vertices.push(place(r, z, 2.0 * PI * j as f64 / n as f64));
        }
        rings.push(start);
    }
    let top = vertices.len() as u32;
    vertices.push(place(0.0, profile[profile.len() - 1].1, 0.0));
    let n32 = n as u32;
    let idx = |ring: u32, j: u32| ring + (j % n32);
    for j in 0..n32 {
        triangles.push([bottom, idx(rings[0], j + 1), idx(rings[0], j)]);
    }
    for w in rings.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        for j in 0..n32 {
            let (a, b, c, d) = (idx(lo, j), idx(lo, j + 1), idx(hi, j + 1), idx(hi, j));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let last = *rings.last().unwrap();
    for j in 0..n32 {
        triangles.push([top, idx(last, j), idx(last, j + 1)]);
    }
    Mesh::new(vertices, triangles)
}

/// Pointwise minimum over one or more primitives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSdf {
    primitives: Vec<Primitive>,
    /// Padding added around the primitives' bounds for `domain_bounds`.
    #[serde(default = "default_margin")]
    margin: f64,
}

fn default_margin() -> f64 {
    20.0
}

impl AnalyticSdf {
    pub fn new(primitive: Primitive) -> Result<Self> {
        Self::union(vec![primitive])
    }

    pub fn union(primitives: Vec<Primitive>) -> Result<Self> {
        if primitives.is_empty() {
            return Err(invalid("analytic field needs at least one primitive"));
        }
        for p in &primitives {
            p.validate()?;
        }
        Ok(Self { primitives, margin: default_margin() })
    }

    pub fn sphere(center: Vec3, radius: f64) -> Result<Self> {
        Self::new(Primitive::Sphere { center, radius })
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        self.primitives.iter().any(|q| q.contains(p))
    }

    pub fn kind(&self) -> Option<PrimitiveKind> {
        match self.primitives.as_slice() {
            [p] => Some(p.kind()),
            _ => None,
        }
    }

    pub fn bounds(&self) -> Aabb {
        self.primitives.iter().fold(Aabb::empty(), |b, p| b.union(&p.bounds()))
    }
}

impl SdfField for AnalyticSdf {
    fn eval(&self, x: &Vec3) -> f64 {
        self.primitives.iter().map(|p| p.sdf(x)).fold(f64::INFINITY, f64::min)
    }

    fn domain_bounds(&self) -> Aabb {
        self.bounds().padded(self.margin)
    }
}

/// The posed capsule hand as a union field in the wrist frame.
pub fn hand_capsules(model: &HandModel, articulation: &[f64]) -> Result<AnalyticSdf> {
    let placements = model.skeleton().placements(articulation)?;
    AnalyticSdf::union(
        model
            .bones()
            .iter()
            .map(|b| {
                let t = &placements[b.frame];
                Primitive::Capsule { a: t.apply(&b.start), b: t.apply(&b.end), radius: b.radius }
            })
            .collect(),
    )
}
