//! Adam optimiser over [`Network`] parameters.

use crate::net::{Network, NetworkShape};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Network<T>,
    pub v: Network<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(shape: NetworkShape, config: AdamConfig) -> Adam<T> {
        Adam {
            config,
            step: 0,
            m: Network::zeros(shape),
            v: Network::zeros(shape),
        }
    }

    /// One descent step `params -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn apply(&mut self, params: &mut Network<T>, grads: &Network<T>, lr: f64) {
        assert_eq!(params.shape, grads.shape);
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - libm::pow(beta1, t as f64);
        let bc2 = 1.0 - libm::pow(beta2, t as f64);
        let (b1, b2) = (T::lit(beta1), T::lit(beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - beta1), T::lit(1.0 - beta2));
        let step_size = T::lit(lr / bc1);
        let inv_sqrt_bc2 = T::lit(1.0 / libm::sqrt(bc2));
        let eps = T::lit(epsilon);
        let tensors = params
            .tensors_mut()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + one_b1 * gi;
                v[i] = b2 * v[i] + one_b2 * gi * gi;
                p[i] -= step_size * m[i] / (v[i].sqrt() * inv_sqrt_bc2 + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SHAPE: NetworkShape = NetworkShape {
        input: 2,
        shared: 2,
        head: 2,
        actions: 2,
    };

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params: Network<f64> = Network::zeros(SHAPE);
        let mut grads: Network<f64> = Network::zeros(SHAPE);
        grads.fill(3.0);
        grads.value_out.bias[0] = -0.5;
        let mut adam = Adam::new(SHAPE, AdamConfig::default());
        adam.apply(&mut params, &grads, 0.01);
        assert!((params.shared.weight[0] + 0.01).abs() < 1e-9);
        assert!((params.value_out.bias[0] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params: Network<f32> = Network::zeros(SHAPE);
        params.fill(1.5);
        let grads = Network::zeros(SHAPE);
        let mut adam = Adam::new(SHAPE, AdamConfig::default());
        adam.apply(&mut params, &grads, 0.1);
        assert!(params.params().all(|&p| p == 1.5));
    }
}
