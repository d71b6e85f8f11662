use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hyperparameters of the adaptive-moment optimizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    /// `β1 = 0.5` is the usual choice for adversarial training.
    pub fn with_rate(learning_rate: f64) -> Self {
        AdamConfig {
            learning_rate,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment accumulators for a fixed list of parameter tensors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState<T> {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    /// Creates zeroed accumulators for tensors of the given lengths.
    pub fn new(config: AdamConfig, shapes: &[usize]) -> Self {
        OptimizerState {
            config,
            step: 0,
            first: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            second: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn for_params(config: AdamConfig, params: &[&mut [T]]) -> Self {
        let shapes: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(config, &shapes)
    }

    /// One bias-corrected update. Fails without touching anything if a
    /// gradient entry is not finite.
    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::Shape(format!(
                "optimizer tracks {} tensors, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.first[i].len() || g.len() != p.len() {
                return Err(Error::Shape(format!("tensor {i} changed shape")));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { tensor: i });
            }
        }
        self.step += 1;
        let c = &self.config;
        let b1 = T::lit(c.beta1);
        let b2 = T::lit(c.beta2);
        let one = T::one();
        let lr = T::lit(c.learning_rate);
        let eps = T::lit(c.eps);
        let correct1 = one - T::lit(c.beta1.powi(self.step.min(i32::MAX as u64) as i32));
        let correct2 = one - T::lit(c.beta2.powi(self.step.min(i32::MAX as u64) as i32));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let m_hat = m[j] / correct1;
                let v_hat = v[j] / correct2;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_scalar(w0: f64, lr: f64, steps: usize, grad: impl Fn(f64) -> f64) -> f64 {
        let mut w = [w0];
        let mut st = OptimizerState::<f64>::new(AdamConfig::with_rate(lr), &[1]);
        for _ in 0..steps {
            let g = [grad(w[0])];
            st.step(&mut [&mut w[..]], &[&g[..]]).unwrap();
        }
        w[0]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.5f64, -2.0];
        let before = p.clone();
        let mut st = OptimizerState::new(AdamConfig::with_rate(0.1), &[2]);
        for _ in 0..5 {
            st.step(&mut [&mut p[..]], &[&[0.0, 0.0][..]]).unwrap();
        }
        assert_eq!(p, before);
        assert_eq!(st.step, 5);
    }

    #[test]
    fn one_step_descends_quadratic() {
        assert!(run_scalar(1.0, 0.1, 1, |w| 2.0 * w) < 1.0);
    }

    #[test]
    fn converges_on_shifted_quadratic() {
        let w = run_scalar(0.0, 0.1, 200, |w| 2.0 * (w - 3.0));
        assert!((w - 3.0).abs() < 0.05, "w = {w}");
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = vec![1.0f64];
        let mut st = OptimizerState::new(AdamConfig::with_rate(0.1), &[1]);
        let err = st.step(&mut [&mut p[..]], &[&[f64::NAN][..]]).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { tensor: 0 }));
        assert_eq!(p, vec![1.0]);
        assert_eq!(st.step, 0);
    }
}
