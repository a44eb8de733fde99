//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use super::TensorMut;
use crate::gru::TensorRef;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment accumulators, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes.into_iter().map(|n| (vec![0.0; n], vec![0.0; n])).unzip();
        AdamState { config, m, v, t: 0 }
    }

    /// One update: `θ ← θ − lr · m̂ / (√v̂ + ε)`.
    pub fn step(&mut self, params: Vec<TensorMut<'_>>, grads: Vec<TensorRef<'_>>) {
        assert_eq!(params.len(), self.m.len(), "parameter tensor count");
        assert_eq!(grads.len(), self.m.len(), "gradient tensor count");
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        self.t += 1;
        let bias1 = 1.0 - beta1.powi(self.t as i32);
        let bias2 = 1.0 - beta2.powi(self.t as i32);

        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            assert_eq!(p.data.len(), g.data.len(), "shape mismatch in {}", g.name);
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                if m[i] != 0.0 {
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    p.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_scalar(state: &mut AdamState, theta: &mut f64, g: f64) {
        let mut p = [*theta];
        let gs = [g];
        state.step(
            vec![TensorMut::new(&mut p)],
            vec![TensorRef::vector("theta".into(), &gs)],
        );
        *theta = p[0];
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut state = AdamState::new(AdamConfig::default(), [1]);
        let mut theta = 0.7;
        step_scalar(&mut state, &mut theta, 0.0);
        assert_eq!(theta, 0.7);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_hand_value() {
        let mut state = AdamState::new(AdamConfig::default(), [1]);
        let mut theta = 0.0;
        step_scalar(&mut state, &mut theta, 1.0);
        // m̂ = 1, v̂ = 1 at t = 1
        assert_eq!(theta, -1e-3 / (1.0 + 1e-8));
        assert!((theta + 0.001).abs() < 1e-10);
    }

    #[test]
    fn first_step_moves_against_the_gradient() {
        let grads = [3.0, -0.5, 1e-6, -200.0];
        let mut params = [0.0; 4];
        let mut state = AdamState::new(AdamConfig::default(), [4]);
        state.step(
            vec![TensorMut::new(&mut params)],
            vec![TensorRef::vector("p".into(), &grads)],
        );
        for (p, g) in params.iter().zip(grads) {
            assert_eq!(p.signum(), -g.signum());
        }
        assert!(state.v[0].iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn repeated_steps_follow_the_recurrence() {
        let cfg = AdamConfig::default();
        let mut state = AdamState::new(cfg, [1]);
        let mut theta = 1.0;
        let (mut m, mut v, mut expect) = (0.0f64, 0.0f64, 1.0f64);
        for (t, g) in [0.5, -0.25, 2.0, 1.0].into_iter().enumerate() {
            step_scalar(&mut state, &mut theta, g);
            let t = (t + 1) as i32;
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
            let m_hat = m / (1.0 - cfg.beta1.powi(t));
            let v_hat = v / (1.0 - cfg.beta2.powi(t));
            expect -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
            assert!((theta - expect).abs() < 1e-15);
        }
    }
}
