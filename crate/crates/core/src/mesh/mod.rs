//! Triangle meshes, zero-level-set extraction and mesh I/O.

mod io;
mod marching_cubes;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use io::{export_mesh, import_mesh, read_mesh, write_mesh, MeshFormat};
pub use marching_cubes::{extract_grid, marching_cubes, marching_cubes_samples, marching_cubes_with, reconstruct};

use crate::error::invalid;
use crate::kinematics::RigidTransform;
use crate::{Aabb, Result, Vec3};

/// Indexed triangle mesh in millimeters. Triangles are counter-clockwise
/// when seen from outside.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Option<Vec<Vec3>>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices, triangles, normals: None }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Checks index ranges and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len() as u32;
        if self.triangles.iter().flatten().any(|i| *i >= n) {
            return Err(invalid("triangle index out of range"));
        }
        if !self.vertices.iter().all(|v| v.iter().all(|c| c.is_finite())) {
            return Err(invalid("mesh vertices must be finite"));
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.vertices.len() {
                return Err(invalid("normal count must match vertex count"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    fn corners(&self, t: &[u32; 3]) -> [Vec3; 3] {
        t.map(|i| self.vertices[i as usize])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(&self.triangles[t]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Every undirected edge is used by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        if self.triangles.is_empty() {
            return false;
        }
        let mut degree: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *degree.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        degree.values().all(|d| *d == 2)
    }

    pub fn flipped(&self) -> Mesh {
        Mesh {
            vertices: self.vertices.clone(),
            triangles: self.triangles.iter().map(|t| [t[0], t[2], t[1]]).collect(),
            normals: self.normals.as_ref().map(|n| n.iter().map(|v| -v).collect()),
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| t.apply(v)).collect(),
            triangles: self.triangles.clone(),
            normals: self.normals.as_ref().map(|n| n.iter().map(|v| t.rotation * v).collect()),
        }
    }

    pub fn translated(&self, d: &Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v + d).collect(),
            triangles: self.triangles.clone(),
            normals: self.normals.clone(),
        }
    }

    /// Concatenates two meshes.
    pub fn merged(&self, other: &Mesh) -> Mesh {
        let off = self.vertices.len() as u32;
        let mut out = Mesh::new(self.vertices.clone(), self.triangles.clone());
        out.vertices.extend_from_slice(&other.vertices);
        out.triangles.extend(other.triangles.iter().map(|t| t.map(|i| i + off)));
        out
    }

    /// Area-weighted vertex normals.
    pub fn compute_normals(&mut self) {
        let mut normals = vec![Vec3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = self.corners(t);
            let n = (b - a).cross(&(c - a));
            for i in t {
                normals[*i as usize] += n;
            }
        }
        for n in normals.iter_mut() {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        self.normals = Some(normals);
    }

    /// `n` area-weighted uniform surface samples. Empty meshes give no points.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Vec<Vec3> {
        let mut cumulative = Vec::with_capacity(self.triangles.len());
        let mut total = 0.0;
        for t in 0..self.triangles.len() {
            total += self.triangle_area(t);
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let r = rng.random::<f64>() * total;
                let t = cumulative.partition_point(|c| *c <= r).min(cumulative.len() - 1);
                let [a, b, c] = self.corners(&self.triangles[t]);
                let (u, v): (f64, f64) = (rng.random(), rng.random());
                let su = u.sqrt();
                a * (1.0 - su) + b * (su * (1.0 - v)) + c * (su * v)
            })
            .collect()
    }
}

/// Result of [`mesh_volume`]. `closed` is false when some edge is not shared
/// by exactly two triangles, in which case the value is best-effort.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshVolume {
    pub volume: f64,
    pub signed_volume: f64,
    pub closed: bool,
}

/// Enclosed volume (mm^3) by the divergence theorem.
pub fn mesh_volume(mesh: &Mesh) -> MeshVolume {
    let signed: f64 = mesh
        .triangles
        .iter()
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            a.dot(&b.cross(&c)) / 6.0
        })
        .sum();
    let closed = mesh.is_watertight();
    if !closed && !mesh.is_empty() {
        log::warn!("mesh_volume called on an open mesh; result is approximate");
    }
    MeshVolume { volume: signed.abs(), signed_volume: signed, closed }
}

/// Axis-aligned box mesh with outward winding.
pub fn cube_mesh(center: Vec3, half: f64) -> Mesh {
    crate::field::Primitive::Box { center, half_extents: Vec3::repeat(half), rotation: Vec3::zeros() }
        .triangulate(half)
}
