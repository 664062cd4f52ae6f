//! The signed-distance field contract and its implementations.
//!
//! Sign convention: negative inside, positive outside, millimeters.

mod analytic;
mod grid;
mod neural;
mod pyramid;

use std::sync::atomic::{AtomicU64, Ordering};

pub use analytic::{hand_capsules, AnalyticSdf, Primitive, PrimitiveKind};
pub use grid::GridSdf;
pub use neural::NeuralSdf;
pub use pyramid::{sample_pyramid, FeatureImage, FeatureLevel, FeaturePyramid, PyramidConfig};

use crate::error::invalid;
use crate::par::{self, Execution};
use crate::{Aabb, Result, Vec3};

/// A scalar signed-distance field over wrist-frame millimeters.
pub trait SdfField: Send + Sync {
    fn eval(&self, x: &Vec3) -> f64;

    /// Region where the field is meaningful.
    fn domain_bounds(&self) -> Aabb;

    /// Evaluates many points; results are independent of the strategy.
    fn eval_batch(&self, points: &[Vec3], exec: Execution) -> Vec<f64> {
        par::map_slice(exec, points, |p| self.eval(p))
    }

    /// Re-conditions an articulation-dependent field on a new articulation.
    /// Fields that do not depend on the hand return `None`.
    fn reconditioned(&self, _articulation: &[f64]) -> Option<Box<dyn SdfField + '_>> {
        None
    }
}

impl<F: SdfField + ?Sized> SdfField for &F {
    fn eval(&self, x: &Vec3) -> f64 {
        (**self).eval(x)
    }
    fn domain_bounds(&self) -> Aabb {
        (**self).domain_bounds()
    }
    fn eval_batch(&self, points: &[Vec3], exec: Execution) -> Vec<f64> {
        (**self).eval_batch(points, exec)
    }
    fn reconditioned(&self, articulation: &[f64]) -> Option<Box<dyn SdfField + '_>> {
        (**self).reconditioned(articulation)
    }
}

impl<F: SdfField + ?Sized> SdfField for Box<F> {
    fn eval(&self, x: &Vec3) -> f64 {
        (**self).eval(x)
    }
    fn domain_bounds(&self) -> Aabb {
        (**self).domain_bounds()
    }
    fn eval_batch(&self, points: &[Vec3], exec: Execution) -> Vec<f64> {
        (**self).eval_batch(points, exec)
    }
    fn reconditioned(&self, articulation: &[f64]) -> Option<Box<dyn SdfField + '_>> {
        (**self).reconditioned(articulation)
    }
}

pub fn eval_sdf<F: SdfField + ?Sized>(field: &F, x: &Vec3) -> f64 {
    field.eval(x)
}

/// Central-difference gradient with step `step` mm on each axis.
pub fn eval_grad<F: SdfField + ?Sized>(field: &F, x: &Vec3, step: f64) -> Result<Vec3> {
    if !(step.is_finite() && step > 0.0) {
        return Err(invalid("gradient step must be positive"));
    }
    Ok(central_difference(|p| field.eval(p), x, step))
}

pub(crate) fn central_difference(f: impl Fn(&Vec3) -> f64, x: &Vec3, step: f64) -> Vec3 {
    Vec3::from_fn(|i, _| {
        let e = Vec3::ith(i, step);
        (f(&(x + e)) - f(&(x - e))) / (2.0 * step)
    })
}

/// Wraps a field and counts every evaluated point.
pub struct CountingField<F> {
    inner: F,
    queries: AtomicU64,
}

impl<F: SdfField> CountingField<F> {
    pub fn new(inner: F) -> Self {
        Self { inner, queries: AtomicU64::new(0) }
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &F {
        &self.inner
    }
}

impl<F: SdfField> SdfField for CountingField<F> {
    fn eval(&self, x: &Vec3) -> f64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x)
    }

    fn domain_bounds(&self) -> Aabb {
        self.inner.domain_bounds()
    }

    fn eval_batch(&self, points: &[Vec3], exec: Execution) -> Vec<f64> {
        self.queries.fetch_add(points.len() as u64, Ordering::Relaxed);
        self.inner.eval_batch(points, exec)
    }
}
