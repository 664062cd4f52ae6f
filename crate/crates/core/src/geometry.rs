//! Shared vector aliases and the axis-aligned box type.

use serde::{Deserialize, Serialize};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Axis-aligned box in millimeters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// Cube `[-half, half]^3`.
    pub fn cube(half: f64) -> Self {
        Self::new(Vec3::repeat(-half), Vec3::repeat(half))
    }

    pub fn empty() -> Self {
        Self::new(Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY))
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb::new(self.min.inf(&other.min), self.max.sup(&other.max))
    }

    pub fn intersection(&self, other: &Aabb) -> Option<Aabb> {
        let b = Aabb::new(self.min.sup(&other.min), self.max.inf(&other.max));
        (b.min.x < b.max.x && b.min.y < b.max.y && b.min.z < b.max.z).then_some(b)
    }

    pub fn padded(&self, pad: f64) -> Aabb {
        Aabb::new(self.min.add_scalar(-pad), self.max.add_scalar(pad))
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// True when any axis has non-positive or non-finite extent.
    pub fn is_degenerate(&self) -> bool {
        let e = self.extent();
        !(e.iter().all(|v| v.is_finite() && *v > 0.0))
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn clamp(&self, p: &Vec3) -> Vec3 {
        p.sup(&self.min).inf(&self.max)
    }

    /// Euclidean distance from `p` to the box; zero inside.
    pub fn distance(&self, p: &Vec3) -> f64 {
        (p - self.clamp(p)).norm()
    }
}
