//! Sinusoidal positional encoding and the two articulation conditionings.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::kinematics::{self, HandModel, RigidTransform, ARTICULATION_DIM};
use crate::{Result, Vec3};

/// Width of [`pose_param_embed`].
pub const POSE_PARAM_WIDTH: usize = 3 + ARTICULATION_DIM;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub num_frequencies: usize,
    pub include_input: bool,
    /// Multiplies millimeter coordinates before encoding.
    pub input_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { num_frequencies: 6, include_input: true, input_scale: 0.01 }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_frequencies == 0 {
            return Err(invalid("encoder needs at least one frequency"));
        }
        if !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return Err(invalid("encoder input_scale must be positive"));
        }
        Ok(())
    }

    pub fn width_per_scalar(&self) -> usize {
        2 * self.num_frequencies + usize::from(self.include_input)
    }

    pub fn articulation_width(&self) -> usize {
        ARTICULATION_DIM * self.width_per_scalar()
    }
}

/// Encodes each scalar as `[u?, sin(2^0 pi u), cos(2^0 pi u), ...]` into `out`.
pub fn positional_encode_into(cfg: &EncoderConfig, v: &[f64], out: &mut [f64]) {
    let w = cfg.width_per_scalar();
    debug_assert_eq!(out.len(), v.len() * w);
    for (u, block) in v.iter().zip(out.chunks_exact_mut(w)) {
        let mut i = 0;
        if cfg.include_input {
            block[0] = *u;
            i = 1;
        }
        let mut freq = PI;
        for _ in 0..cfg.num_frequencies {
            let (s, c) = (freq * u).sin_cos();
            block[i] = s;
            block[i + 1] = c;
            i += 2;
            freq *= 2.0;
        }
    }
}

pub fn positional_encode(cfg: &EncoderConfig, v: &[f64]) -> Result<Vec<f64>> {
    if !v.iter().all(|x| x.is_finite()) {
        return Err(invalid("encoder input must be finite"));
    }
    let mut out = vec![0.0; v.len() * cfg.width_per_scalar()];
    positional_encode_into(cfg, v, &mut out);
    Ok(out)
}

/// `gamma(T(theta_A) x)` from precomputed wrist-to-joint transforms.
pub fn articulation_embed_with(
    cfg: &EncoderConfig,
    wrist_to_joint: &[RigidTransform],
    x: &Vec3,
    out: &mut [f64],
) {
    let mut coords = [0.0; ARTICULATION_DIM];
    kinematics::joint_coords_with(wrist_to_joint, x, &mut coords);
    for c in coords.iter_mut() {
        *c *= cfg.input_scale;
    }
    positional_encode_into(cfg, &coords, out);
}

/// Articulation-aware embedding of wrist-frame point `x`.
pub fn articulation_embed(
    model: &HandModel,
    articulation: &[f64],
    x: &Vec3,
    cfg: &EncoderConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(invalid("query point must be finite"));
    }
    let fk = kinematics::forward_kinematics(model, articulation)?;
    let mut out = vec![0.0; cfg.articulation_width()];
    articulation_embed_with(cfg, &fk, x, &mut out);
    Ok(out)
}

/// Analytic `d psi / d x`: one row of three partials per output entry.
pub fn articulation_embed_jacobian(
    model: &HandModel,
    articulation: &[f64],
    x: &Vec3,
    cfg: &EncoderConfig,
) -> Result<Vec<[f64; 3]>> {
    let fk = kinematics::forward_kinematics(model, articulation)?;
    let mut coords = [0.0; ARTICULATION_DIM];
    kinematics::joint_coords_with(&fk, x, &mut coords);
    let w = cfg.width_per_scalar();
    let mut rows = Vec::with_capacity(cfg.articulation_width());
    for (s, q) in coords.iter().enumerate() {
        let u = q * cfg.input_scale;
        // d u / d x is row (s mod 3) of joint j's rotation, scaled.
        let rot = &fk[1 + s / 3].rotation;
        let du: [f64; 3] = std::array::from_fn(|c| rot[(s % 3, c)] * cfg.input_scale);
        if cfg.include_input {
            rows.push(du);
        }
        let mut freq = PI;
        for _ in 0..cfg.num_frequencies {
            let (sn, cs) = (freq * u).sin_cos();
            rows.push(du.map(|d| freq * cs * d));
            rows.push(du.map(|d| -freq * sn * d));
            freq *= 2.0;
        }
        debug_assert_eq!(rows.len(), (s + 1) * w);
    }
    Ok(rows)
}

/// `[x, theta_A]`: the pose-parameter conditioning without encoding.
pub fn pose_param_embed(articulation: &[f64], x: &Vec3) -> Result<[f64; POSE_PARAM_WIDTH]> {
    if articulation.len() != ARTICULATION_DIM {
        return Err(crate::Error::Shape { expected: ARTICULATION_DIM, actual: articulation.len() });
    }
    if !(articulation.iter().chain(x.iter()).all(|v| v.is_finite())) {
        return Err(invalid("pose-parameter inputs must be finite"));
    }
    let mut out = [0.0; POSE_PARAM_WIDTH];
    out[..3].copy_from_slice(x.as_slice());
    out[3..].copy_from_slice(articulation);
    Ok(out)
}
