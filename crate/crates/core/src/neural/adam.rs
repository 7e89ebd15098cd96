//! Adam with bias-corrected moment estimates.

use serde::{Deserialize, Serialize};

use super::mlp::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Optimizer state for a fixed list of parameter tensors.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    pub config: AdamConfig,
    steps: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, sizes: &[usize]) -> Self {
        Self {
            config,
            steps: 0,
            first: sizes.iter().map(|n| vec![T::zero(); *n]).collect(),
            second: sizes.iter().map(|n| vec![T::zero(); *n]).collect(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn first_moment(&self, tensor: usize) -> &[T] {
        &self.first[tensor]
    }

    pub fn second_moment(&self, tensor: usize) -> &[T] {
        &self.second[tensor]
    }

    /// One update of every tensor; `params` and `grads` must follow the construction order.
    pub fn step(&mut self, params: Vec<&mut [T]>, grads: &[&[T]]) {
        assert_eq!(params.len(), self.first.len(), "parameter tensor count changed");
        self.steps += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (one_b1, one_b2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let t = self.steps as i32;
        let corr1 = T::of(1.0 - c.beta1.powi(t));
        let corr2 = T::of(1.0 - c.beta2.powi(t));
        let (lr, eps) = (T::of(c.learning_rate), T::of(c.epsilon));
        for (i, p) in params.into_iter().enumerate() {
            let g = grads[i];
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for j in 0..p.len() {
                m[j] = b1 * m[j] + one_b1 * g[j];
                v[j] = b2 * v[j] + one_b2 * g[j] * g[j];
                let mhat = m[j] / corr1;
                let vhat = v[j] / corr2;
                p[j] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}
