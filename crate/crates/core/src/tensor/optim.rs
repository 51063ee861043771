//! First-order optimizers.

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    step: u64,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self {
            kind,
            learning_rate,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam, learning_rate)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::invalid(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.shape() != g.shape() {
                return Err(Error::DimensionMismatch {
                    op: "optimizer step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }
        self.step += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g.data()) {
                        *pv -= self.learning_rate * gv;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = params
                        .iter()
                        .map(|p| Matrix::zeros(p.rows(), p.cols()))
                        .collect();
                    self.second_moment = self.first_moment.clone();
                }
                if self.first_moment.len() != params.len() {
                    return Err(Error::invalid("adam parameter count changed between steps"));
                }
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_BETA1.powi(t);
                let c2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(
                    self.first_moment
                        .iter_mut()
                        .zip(self.second_moment.iter_mut()),
                ) {
                    for (((pv, &gv), mv), vv) in p
                        .data_mut()
                        .iter_mut()
                        .zip(g.data())
                        .zip(m.data_mut().iter_mut())
                        .zip(v.data_mut().iter_mut())
                    {
                        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                        let m_hat = *mv / c1;
                        let v_hat = *vv / c2;
                        *pv -= self.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_step() {
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let mut p = vec![Matrix::scalar(1.0)];
        opt.step(&mut p, &[Matrix::scalar(1.0)]).unwrap();
        assert!((p[0].item() - 0.9).abs() < 1e-15);
        opt.step(&mut p, &[Matrix::scalar(0.0)]).unwrap();
        assert!((p[0].item() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_about_lr() {
        // Scalar oracle: m = 0.1, v = 0.001, m_hat = 1, v_hat = 1, delta = lr / (1 + eps).
        let (m, v) = (0.1_f64, 0.001_f64);
        let delta = 0.01 * (m / 0.1) / ((v / 0.001).sqrt() + 1e-8);
        let mut opt = Optimizer::adam(0.01).unwrap();
        let mut p = vec![Matrix::scalar(1.0)];
        opt.step(&mut p, &[Matrix::scalar(1.0)]).unwrap();
        assert!((p[0].item() - (1.0 - delta)).abs() < 1e-15);
        assert!((1.0 - p[0].item() - 0.01).abs() < 1e-9);
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut opt = Optimizer::adam(0.01).unwrap();
        let mut p = vec![Matrix::filled(2, 2, 3.0)];
        opt.step(&mut p, &[Matrix::zeros(2, 2)]).unwrap();
        assert_eq!(p[0], Matrix::filled(2, 2, 3.0));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let mut p = vec![Matrix::zeros(2, 2)];
        assert!(opt.step(&mut p, &[Matrix::zeros(2, 1)]).is_err());
        assert!(Optimizer::adam(0.0).is_err());
    }
}
