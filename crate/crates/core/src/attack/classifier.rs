//! Small supervised classifiers used as attack models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::{Matrix, Optimizer, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    /// Multinomial logistic regression.
    Logreg,
    /// One hidden ReLU layer.
    Mlp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Mlp,
            hidden: 64,
            epochs: 200,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// A fitted classifier. Inputs are standardized with the training
/// statistics before the first layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    kind: ClassifierKind,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Alternating weight and bias matrices.
    params: Vec<Matrix>,
    classes: usize,
}

fn logits_on_tape(tape: &mut Tape, kind: ClassifierKind, params: &[Var], x: Var) -> Result<Var> {
    match kind {
        ClassifierKind::Logreg => {
            let z = tape.matmul(x, params[0])?;
            tape.add_row(z, params[1])
        }
        ClassifierKind::Mlp => {
            let z = tape.matmul(x, params[0])?;
            let z = tape.add_row(z, params[1])?;
            let h = tape.relu(z)?;
            let o = tape.matmul(h, params[2])?;
            tape.add_row(o, params[3])
        }
    }
}

impl Classifier {
    /// Fits on rows of `x` with labels in `0..classes` by full-batch Adam on
    /// cross-entropy.
    pub fn fit(x: &Matrix, y: &[usize], classes: usize, cfg: &ClassifierConfig) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::invalid(format!(
                "{} rows for {} labels",
                x.rows(),
                y.len()
            )));
        }
        if x.rows() == 0 {
            return Err(Error::EmptyInput("classifier training set"));
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let mut present = vec![false; classes];
        y.iter().for_each(|&c| present[c] = true);
        if present.iter().filter(|&&p| p).count() < 2 {
            return Err(Error::Degenerate(
                "training labels contain a single class".into(),
            ));
        }
        if cfg.kind == ClassifierKind::Mlp && cfg.hidden == 0 {
            return Err(Error::invalid("hidden width must be positive"));
        }

        let d = x.cols();
        let n = x.rows() as f64;
        let mut mean = vec![0.0; d];
        let mut scale = vec![0.0; d];
        for r in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(r)) {
                *m += v / n;
            }
        }
        for r in 0..x.rows() {
            for ((s, m), v) in scale.iter_mut().zip(&mean).zip(x.row(r)) {
                *s += (v - m).powi(2) / n;
            }
        }
        let scale = scale
            .into_iter()
            .map(|v| {
                if v.sqrt() > 1e-12 {
                    1.0 / v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();

        let mut rng = rng_from_seed(derive_seed(cfg.seed, "classifier/init"));
        let mut params = match cfg.kind {
            ClassifierKind::Logreg => vec![
                Matrix::glorot(d, classes, &mut rng),
                Matrix::zeros(1, classes),
            ],
            ClassifierKind::Mlp => vec![
                Matrix::glorot(d, cfg.hidden, &mut rng),
                Matrix::zeros(1, cfg.hidden),
                Matrix::glorot(cfg.hidden, classes, &mut rng),
                Matrix::zeros(1, classes),
            ],
        };
        let mut model = Self {
            kind: cfg.kind,
            mean,
            scale,
            params: Vec::new(),
            classes,
        };
        let xs = model.standardize(x)?;
        let mut opt = Optimizer::adam(cfg.learning_rate)?;
        for _ in 0..cfg.epochs {
            let mut tape = Tape::new();
            let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
            let xv = tape.constant(xs.clone());
            let logits = logits_on_tape(&mut tape, cfg.kind, &vars, xv)?;
            let loss = tape.softmax_cross_entropy(logits, y)?;
            let grads = tape.backward(loss)?.get_all(&vars)?;
            opt.step(&mut params, &grads)?;
        }
        model.params = params;
        Ok(model)
    }

    fn standardize(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                op: "classifier input",
                left: (x.rows(), self.mean.len()),
                right: x.shape(),
            });
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, m), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.scale) {
                *v = (*v - m) * s;
            }
        }
        Ok(out)
    }

    pub fn kind(&self) -> ClassifierKind {
        self.kind
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Class probabilities, one row per input row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let xs = self.standardize(x)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self
            .params
            .iter()
            .map(|p| tape.constant(p.clone()))
            .collect();
        let xv = tape.constant(xs);
        let logits = logits_on_tape(&mut tape, self.kind, &vars, xv)?;
        Ok(tape.value(logits)?.softmax_rows())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        Ok(self.predict_proba(x)?.argmax_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_data_is_learned() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let y: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        for kind in [ClassifierKind::Logreg, ClassifierKind::Mlp] {
            let cfg = ClassifierConfig {
                kind,
                ..ClassifierConfig::default()
            };
            let clf = Classifier::fit(&x, &y, 2, &cfg).unwrap();
            assert_eq!(clf.predict(&x).unwrap(), y, "{kind:?}");
            let p = clf.predict_proba(&x).unwrap();
            for r in 0..p.rows() {
                assert!((p.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::zeros(3, 2);
        let err = Classifier::fit(&x, &[1, 1, 1], 2, &ClassifierConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let clf = Classifier::fit(&x, &[0, 1], 2, &ClassifierConfig::default()).unwrap();
        assert!(clf.predict(&Matrix::zeros(1, 2)).is_err());
    }
}
