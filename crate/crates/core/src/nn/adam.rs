use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
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

/// Adam optimizer state: step count plus first/second moment buffers shaped
/// like the parameter tensors they track.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One bias-corrected Adam update. `params` and `grads` are parallel
    /// lists of tensors in a fixed enumeration order.
    pub fn step(&mut self, mut params: Vec<&mut [T]>, grads: &[Vec<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} gradient tensors", params.len()),
                got: format!("{}", grads.len()),
            });
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
            self.v = self.m.clone();
        }
        for g in grads {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    epoch: 0,
                    batch: 0,
                    detail: "non-finite gradient".into(),
                });
            }
        }
        self.t += 1;
        let c = self.config;
        let b1 = T::from_f64(c.beta1);
        let b2 = T::from_f64(c.beta2);
        let one_m_b1 = T::from_f64(1.0 - c.beta1);
        let one_m_b2 = T::from_f64(1.0 - c.beta2);
        let corr1 = T::from_f64(1.0 / (1.0 - c.beta1.powi(self.t as i32)));
        let corr2 = T::from_f64(1.0 / (1.0 - c.beta2.powi(self.t as i32)));
        let lr = T::from_f64(c.lr);
        let eps = T::from_f64(c.eps);

        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if param.len() != grad.len() || param.len() != m.len() {
                return Err(Error::DimensionMismatch {
                    expected: format!("{} entries", param.len()),
                    got: format!("{}", grad.len()),
                });
            }
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + one_m_b1 * g;
                v[i] = b2 * v[i] + one_m_b2 * g * g;
                let m_hat = m[i] * corr1;
                let v_hat = v[i] * corr2;
                param[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
