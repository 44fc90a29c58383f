use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub epsilon: f32,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f32) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First/second moment buffers for one flat parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f32>,
    pub v: Vec<f32>,
    pub step: u32,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update(params: &mut [f32], grads: &[f32], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || state.v.len() != state.m.len() {
        return Err(invalid(format!(
            "adam_update: params {}, grads {}, state {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    let step_size = cfg.lr / bc1;
    let inv_bc2_sqrt = 1.0 / bc2.sqrt();
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let denom = v.sqrt() * inv_bc2_sqrt + cfg.epsilon;
        *p -= step_size * *m / denom;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params_and_decays_moments() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        st.m = vec![0.5, 0.5];
        st.v = vec![0.25, 0.25];
        adam_update(&mut p, &[0.0, 0.0], &mut st, &AdamConfig::default()).unwrap();
        // with nonzero carried moments the parameters still move; from a fresh state they do not
        assert!((st.m[0] - 0.45).abs() < 1e-7);
        assert!((st.v[0] - 0.25 * 0.999).abs() < 1e-7);
        let mut q = vec![1.0, -2.0];
        let mut fresh = AdamState::new(2);
        adam_update(&mut q, &[0.0, 0.0], &mut fresh, &AdamConfig::default()).unwrap();
        assert_eq!(q, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        // m̂ = g, v̂ = g² after bias correction, so the step is lr·g/(|g|+ε)
        for g in [3.0f32, -0.02] {
            let mut p = vec![0.0];
            let mut st = AdamState::new(1);
            adam_update(&mut p, &[g], &mut st, &AdamConfig::with_lr(0.1)).unwrap();
            let expect = -0.1 * g / (g.abs() + 1e-8);
            assert!((p[0] - expect).abs() < 1e-6, "{} vs {}", p[0], expect);
        }
    }

    #[test]
    fn constant_gradient_step_converges_to_lr() {
        let mut p = vec![0.0f32];
        let mut st = AdamState::new(1);
        let cfg = AdamConfig::with_lr(0.01);
        let mut last = 0.0;
        for _ in 0..5000 {
            let before = p[0];
            adam_update(&mut p, &[0.7], &mut st, &cfg).unwrap();
            last = before - p[0];
        }
        assert!((last - 0.01).abs() < 1e-5, "{last}");
    }

    #[test]
    fn shape_mismatch() {
        let mut p = vec![0.0; 3];
        let mut st = AdamState::new(3);
        assert!(adam_update(&mut p, &[0.0; 2], &mut st, &AdamConfig::default()).is_err());
    }
}
