//! Articulation-conditioned implicit signed-distance reconstruction of
//! hand-held objects.
//!
//! The crate is organised bottom-up:
//!
//! - [`kinematics`]: capsule-skinned 16-frame hand skeleton, forward
//!   kinematics and kinematic Jacobians.
//! - [`camera`]: weak/full perspective pinhole camera.
//! - [`encoding`]: sinusoidal encoding and the two articulation
//!   conditionings.
//! - [`field`]: the [`SdfField`](field::SdfField) contract with analytic,
//!   grid and neural implementations, plus the pixel-aligned feature pyramid.
//! - [`neural`]: skip-connection decoder with hand-written backpropagation,
//!   Adam and the data + eikonal training objective.
//! - [`data`]: synthetic grasp scenes and SDF supervision sampling.
//! - [`mesh`]: marching cubes, mesh volume and OBJ/PLY I/O.
//! - [`metrics`]: Chamfer, F-score, intersection volume and EPE.
//! - [`refine`]: test-time articulation refinement against a frozen field.
//!
//! Batch work (grid baking, batched network evaluation, training batches,
//! scene generation) runs on rayon when the `parallel` feature is enabled
//! and falls back to plain iterators otherwise. Every parallel reduction is
//! ordered, so results never depend on the thread count.

pub mod camera;
pub mod data;
pub mod encoding;
mod error;
pub mod field;
pub mod geometry;
pub mod kinematics;
pub mod mesh;
pub mod metrics;
pub mod neural;
pub mod par;
pub mod refine;

pub use error::{Error, Result};
pub use geometry::{Aabb, Mat3, Vec3};
