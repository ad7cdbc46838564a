use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adam moments and hyperparameters for a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::invalid("parameter, gradient and moment lengths differ"));
        }
        self.step += 1;
        let t = self.step as f64;
        let c1 = 1.0 - libm::pow(self.beta1, t);
        let c2 = 1.0 - libm::pow(self.beta2, t);
        for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (libm::sqrt(v_hat) + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut adam = AdamState::new(3, 1e-3);
        let mut p = [0.5, -1.0, 2.0];
        adam.update(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, [0.5, -1.0, 2.0]);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn first_step_is_bias_corrected() {
        let mut adam = AdamState::new(1, 0.001);
        let mut p = [0.0];
        adam.update(&mut p, &[1.0]).unwrap();
        let expected = 0.001 / (1.0 + 1e-8);
        assert!((p[0] + expected).abs() < 1e-15);
        // magnitude is independent of the gradient scale on step one
        let mut adam = AdamState::new(1, 0.001);
        let mut q = [0.0];
        adam.update(&mut q, &[250.0]).unwrap();
        assert!((q[0] + 0.001).abs() < 1e-10);
    }

    #[test]
    fn length_mismatch_errors() {
        let mut adam = AdamState::new(2, 1e-3);
        assert!(adam.update(&mut [0.0; 3], &[0.0; 3]).is_err());
    }
}
