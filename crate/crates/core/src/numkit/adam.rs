use serde::{Deserialize, Serialize};

use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Bias-corrected Adam optimizer state for one flat parameter buffer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState<S> {
    first_moment: Vec<S>,
    second_moment: Vec<S>,
    step_count: u64,
    pub learning_rate: S,
    pub beta1: S,
    pub beta2: S,
    pub eps_stabilizer: S,
}

impl<S: Scalar> AdamState<S> {
    /// Defaults beta1=0.9, beta2=0.999, eps=1e-8; only the learning rate is a
    /// per-experiment choice.
    pub fn new(n_params: usize, learning_rate: S) -> Self {
        Self {
            first_moment: vec![S::zero(); n_params],
            second_moment: vec![S::zero(); n_params],
            step_count: 0,
            learning_rate,
            beta1: S::from_f64_lossy(0.9),
            beta2: S::from_f64_lossy(0.999),
            eps_stabilizer: S::from_f64_lossy(1e-8),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn n_params(&self) -> usize {
        self.first_moment.len()
    }

    /// One Adam update over `params` given `grads`. Buffers, params, and
    /// grads must share one shape; the step count advances by exactly one.
    pub fn step(&mut self, params: &mut [S], grads: &[S]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::shape(
                "adam_step",
                format!("{} state entries", self.first_moment.len()),
                format!("{} params / {} grads", params.len(), grads.len()),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = S::one() - self.beta1.powi(t);
        let bias2 = S::one() - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.first_moment[i] = self.beta1 * self.first_moment[i] + (S::one() - self.beta1) * g;
            self.second_moment[i] =
                self.beta2 * self.second_moment[i] + (S::one() - self.beta2) * g * g;
            let m_hat = self.first_moment[i] / bias1;
            let v_hat = self.second_moment[i] / bias2;
            params[i] = params[i] - self.learning_rate * m_hat / (v_hat.sqrt() + self.eps_stabilizer);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::new(3, 1e-3f64);
        let mut params = vec![1.0, -2.0, 0.5];
        state.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // Hand-evaluated recurrences at t=1 with g=1:
        // m=0.1, v=0.001, m_hat=1, v_hat=1, delta = -lr/(1+eps) = -9.99999990e-4.
        let mut state = AdamState::new(1, 1e-3f64);
        let mut params = vec![0.0];
        state.step(&mut params, &[1.0]).unwrap();
        assert!((params[0] - (-9.9999999e-4)).abs() < 1e-12, "got {}", params[0]);
    }

    #[test]
    fn two_steps_differ_from_one_doubled_lr_step() {
        // Hand-evaluating two consecutive updates shows the path depends on
        // the moment history, not just the total learning rate.
        let g = 0.73;
        let mut twice = AdamState::new(1, 1e-3f64);
        let mut p_twice = vec![0.4];
        twice.step(&mut p_twice, &[g]).unwrap();
        twice.step(&mut p_twice, &[g]).unwrap();

        let mut once = AdamState::new(1, 2e-3f64);
        let mut p_once = vec![0.4];
        once.step(&mut p_once, &[g]).unwrap();

        assert_ne!(p_twice[0], p_once[0]);
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut state = AdamState::new(2, 1e-3f64);
        let mut params = vec![0.0];
        assert!(state.step(&mut params, &[1.0]).is_err());
    }
}
