//! AdamW with decoupled weight decay and a cosine-annealed learning rate.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamWConfig {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Length of the cosine schedule; the rate reaches zero at this step.
    pub total_steps: u64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            base_lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
            total_steps: 1,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr >= 0.0 && self.base_lr.is_finite()) {
            return Err(invalid("lr", "must be finite and nonnegative"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(invalid("betas", "must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) {
            return Err(invalid("eps", "must be positive"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight_decay", "must be nonnegative"));
        }
        if self.total_steps == 0 {
            return Err(invalid("total_steps", "must be positive"));
        }
        Ok(())
    }
}

/// `base * 0.5 * (1 + cos(pi * t / total))`, clamped to zero past the end.
pub fn cosine_lr(base: f64, t: u64, total: u64) -> f64 {
    if t >= total {
        return 0.0;
    }
    base * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * t as f64 / total as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: AdamWConfig,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(param_count: usize, config: AdamWConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first_moment: vec![0.0; param_count],
            second_moment: vec![0.0; param_count],
            step: 0,
        })
    }

    pub fn current_lr(&self) -> f64 {
        cosine_lr(self.config.base_lr, self.step, self.config.total_steps)
    }

    /// One update. Non-finite gradients abort before anything changes. Returns the rate used.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<f64> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first_moment.len(),
                actual: grads.len(),
            });
        }
        if let Some((index, &value)) = grads.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { index, value });
        }
        let c = self.config;
        let lr = self.current_lr();
        let t = (self.step + 1) as i32;
        let bias1 = 1.0 - libm::pow(c.beta1, t as f64);
        let bias2 = 1.0 - libm::pow(c.beta2, t as f64);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p *= 1.0 - lr * c.weight_decay;
            *p -= lr * m_hat / (libm::sqrt(v_hat) + c.eps);
        }
        self.step += 1;
        Ok(lr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_points() {
        assert_eq!(cosine_lr(1e-4, 0, 100), 1e-4);
        assert!((cosine_lr(1e-4, 50, 100) - 5e-5).abs() < 1e-18);
        assert_eq!(cosine_lr(1e-4, 100, 100), 0.0);
        assert_eq!(cosine_lr(1e-4, 150, 100), 0.0);
    }

    #[test]
    fn zero_gradient_fixed_point() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            base_lr: 0.1,
            total_steps: 10,
            ..AdamWConfig::default()
        };
        let mut opt = OptimizerState::new(3, cfg).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        for _ in 0..5 {
            opt.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(opt.step, 5);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamWConfig {
            weight_decay: 0.0,
            base_lr: 0.01,
            total_steps: 1000,
            ..AdamWConfig::default()
        };
        let mut opt = OptimizerState::new(2, cfg).unwrap();
        let mut p = vec![0.0, 0.0];
        opt.step(&mut p, &[3.0, -0.5]).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-9);
    }

    #[test]
    fn decoupled_decay() {
        let cfg = AdamWConfig {
            weight_decay: 0.1,
            base_lr: 0.5,
            total_steps: 1000,
            ..AdamWConfig::default()
        };
        let mut opt = OptimizerState::new(1, cfg).unwrap();
        let mut p = vec![2.0];
        opt.step(&mut p, &[0.0]).unwrap();
        assert!((p[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut opt = OptimizerState::new(2, AdamWConfig::default()).unwrap();
        let mut p = vec![1.0, 1.0];
        let err = opt.step(&mut p, &[0.1, f64::NAN]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { index: 1, .. }));
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(opt.step, 0);
    }
}
