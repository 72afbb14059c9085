use serde::{Deserialize, Serialize};

use super::net::Param;
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new(1e-3)
    }
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One update of `params` against `grads` (same shapes, in order).
    pub fn step(&mut self, params: &mut [Param], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::DimensionMismatch {
                    expected: p.len(),
                    actual: g.len(),
                });
            }
        }
        if self.m.is_empty() {
            self.m = grads.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.iter().map(Vec::len).ne(grads.iter().map(Vec::len)) {
            return Err(Error::InvalidConfig("parameter shapes changed between Adam steps".into()));
        }
        self.t += 1;
        let t = self.t as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(&mut self.v)) {
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p.data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(values: &[f64]) -> Param {
        Param {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = vec![param(&[0.5, -2.0])];
        let mut adam = Adam::default();
        adam.step(&mut params, &[vec![1.0, 1.0]]).unwrap();
        // Oracle: m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε).
        let expected = -1e-3 / (1.0 + 1e-8);
        assert!((params[0].data[0] - 0.5 - expected).abs() < 1e-15);
        assert!((params[0].data[1] + 2.0 - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut params = vec![param(&[0.3, 0.7]), param(&[1.0])];
        let before = params.clone();
        let mut adam = Adam::default();
        for _ in 0..10 {
            adam.step(&mut params, &[vec![0.0; 2], vec![0.0]]).unwrap();
        }
        assert_eq!(params, before);
    }

    #[test]
    fn opposite_gradients_give_opposite_steps() {
        let mut params = vec![param(&[0.0, 0.0])];
        Adam::default().step(&mut params, &[vec![0.37, -0.37]]).unwrap();
        assert_eq!(params[0].data[0], -params[0].data[1]);
        assert!(params[0].data[0] < 0.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut params = vec![param(&[0.0, 0.0])];
        let mut adam = Adam::default();
        assert!(adam.step(&mut params, &[vec![1.0]]).is_err());
        assert!(adam.step(&mut params, &[]).is_err());
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut params = vec![param(&[3.0, -4.0])];
        let mut adam = Adam::new(0.05);
        for _ in 0..2000 {
            let grads = vec![params[0].data.iter().map(|x| 2.0 * x).collect()];
            adam.step(&mut params, &grads).unwrap();
        }
        assert!(params[0].data.iter().all(|x| x.abs() < 1e-3), "{:?}", params[0].data);
    }
}
