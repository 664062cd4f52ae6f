use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    #[serde(skip)]
    pub m: Vec<f64>,
    #[serde(skip)]
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self { step: 0, learning_rate, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning rate must be positive"));
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon >= 0.0) {
            return Err(invalid("Adam betas must lie in [0, 1) and epsilon must be non-negative"));
        }
        if self.m.len() != self.v.len() {
            return Err(Error::Shape { expected: self.m.len(), actual: self.v.len() });
        }
        Ok(())
    }

    /// Rounds parameters' moments to f32 so that an f32 checkpoint restores
    /// the state exactly.
    pub fn round_to_f32(&mut self) {
        for x in self.m.iter_mut().chain(self.v.iter_mut()) {
            *x = *x as f32 as f64;
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grads: &[f64]) -> Result<()> {
    state.validate()?;
    if params.len() != grads.len() {
        return Err(Error::Shape { expected: params.len(), actual: grads.len() });
    }
    if state.m.len() != params.len() {
        return Err(Error::Shape { expected: state.m.len(), actual: params.len() });
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - state.beta1.powf(t);
    let c2 = 1.0 - state.beta2.powf(t);
    let (b1, b2) = (state.beta1, state.beta2);
    for (((p, g), m), v) in params.iter_mut().zip(grads).zip(state.m.iter_mut()).zip(state.v.iter_mut()) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut s = AdamState::new(3, 1e-3);
        let mut p = vec![1.0, -2.0, 3.0];
        adam_step(&mut s, &mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn constant_gradient_steps_approach_lr() {
        let mut s = AdamState::new(2, 1e-2);
        let mut p = vec![0.0, 0.0];
        let mut last = p.clone();
        for _ in 0..2000 {
            adam_step(&mut s, &mut p, &[0.5, -3.0]).unwrap();
            let d: Vec<f64> = p.iter().zip(&last).map(|(a, b)| a - b).collect();
            last = p.clone();
            if s.step > 1000 {
                assert!((d[0] + 1e-2).abs() < 1e-6 && (d[1] - 1e-2).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn zero_betas() {
        let mut s = AdamState::new(3, 0.1);
        s.beta1 = 0.0;
        s.beta2 = 0.0;
        let g = [2.0, -0.5, 1e-3];
        let mut p = vec![0.0; 3];
        adam_step(&mut s, &mut p, &g).unwrap();
        for (pi, gi) in p.iter().zip(g) {
            assert!((pi + 0.1 * gi / (gi.abs() + s.epsilon)).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(3, 0.1);
        assert!(adam_step(&mut s, &mut [0.0; 2], &[0.0; 2]).is_err());
        assert!(adam_step(&mut s, &mut [0.0; 3], &[0.0; 2]).is_err());
    }
}
