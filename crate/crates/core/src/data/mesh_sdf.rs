use std::f64::consts::PI;

use crate::error::invalid;
use crate::field::SdfField;
use crate::mesh::Mesh;
use crate::par::Execution;
use crate::{Aabb, Result, Vec3};

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Signed solid angle of triangle `abc` seen from `p`.
fn solid_angle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let (a, b, c) = (a - p, b - p, c - p);
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * num.atan2(den)
}

/// Signed distance to a triangle mesh: unsigned distance to the nearest
/// triangle, negative where the generalized winding number exceeds 0.5.
///
/// Brute force over all triangles; meant for labels and cross-checks.
#[derive(Clone, Debug)]
pub struct MeshSdf {
    mesh: Mesh,
    watertight: bool,
    bounds: Aabb,
}

impl MeshSdf {
    pub fn new(mesh: Mesh) -> Result<Self> {
        mesh.validate()?;
        if mesh.triangles.is_empty() {
            return Err(invalid("mesh has no triangles"));
        }
        let watertight = mesh.is_watertight();
        if !watertight {
            log::warn!("mesh is not watertight; inside/outside falls back to the winding-number threshold");
        }
        let bounds = mesh.bounds();
        Ok(Self { mesh, watertight, bounds })
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn unsigned_distance(&self, x: &Vec3) -> f64 {
        let v = &self.mesh.vertices;
        self.mesh
            .triangles
            .iter()
            .map(|t| {
                let (a, b, c) = (&v[t[0] as usize], &v[t[1] as usize], &v[t[2] as usize]);
                (closest_point_on_triangle(x, a, b, c) - x).norm_squared()
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    pub fn winding_number(&self, x: &Vec3) -> f64 {
        let v = &self.mesh.vertices;
        let total: f64 = self
            .mesh
            .triangles
            .iter()
            .map(|t| solid_angle(x, &v[t[0] as usize], &v[t[1] as usize], &v[t[2] as usize]))
            .sum();
        total / (4.0 * PI)
    }
}

impl SdfField for MeshSdf {
    fn eval(&self, x: &Vec3) -> f64 {
        let d = self.unsigned_distance(x);
        if d == 0.0 {
            return 0.0;
        }
        if self.winding_number(x) > 0.5 {
            -d
        } else {
            d
        }
    }

    fn domain_bounds(&self) -> Aabb {
        self.bounds.padded(0.1 * self.bounds.extent().max().max(1.0))
    }
}

/// Signed distance from `x` to `mesh` (mm). Builds a [`MeshSdf`] per call;
/// reuse one for many queries.
pub fn point_mesh_sdf(mesh: &Mesh, x: &Vec3) -> Result<f64> {
    Ok(MeshSdf::new(mesh.clone())?.eval(x))
}

/// Batched form of [`point_mesh_sdf`].
pub fn points_mesh_sdf(mesh: &Mesh, points: &[Vec3], exec: Execution) -> Result<Vec<f64>> {
    Ok(MeshSdf::new(mesh.clone())?.eval_batch(points, exec))
}
