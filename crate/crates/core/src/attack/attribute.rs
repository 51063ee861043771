//! Sensitive-attribute inference from released embeddings.

use rand::seq::SliceRandom;

use super::classifier::{Classifier, ClassifierConfig};
use crate::error::{Error, Result};
use crate::metrics::{accuracy, f1_macro};
use crate::rng::{derive_seed, derive_seed_indexed, rng_from_seed};
use crate::tensor::Matrix;

/// Embedding rows with their attribute ids, split into the adversary's
/// labeled auxiliary rows and the target rows.
#[derive(Clone, Debug)]
pub struct AttributeDataset {
    pub embeddings: Matrix,
    pub attributes: Vec<usize>,
    pub aux: Vec<usize>,
    pub target: Vec<usize>,
    pub categories: usize,
}

impl AttributeDataset {
    /// Random split with `round(aux_fraction * n)` auxiliary rows.
    pub fn split(
        embeddings: Matrix,
        attributes: Vec<usize>,
        aux_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let n = embeddings.rows();
        if attributes.len() != n {
            return Err(Error::invalid(format!(
                "{} attributes for {n} embedding rows",
                attributes.len()
            )));
        }
        if !(aux_fraction > 0.0 && aux_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "aux fraction must be in (0,1), got {aux_fraction}"
            )));
        }
        let k = (aux_fraction * n as f64).round() as usize;
        if k == 0 || k == n {
            return Err(Error::invalid("aux fraction leaves one side empty"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(seed, "attribute/split")));
        let mut aux = order[..k].to_vec();
        let mut target = order[k..].to_vec();
        aux.sort_unstable();
        target.sort_unstable();
        let categories = attributes.iter().max().map_or(0, |m| m + 1);
        Ok(Self {
            embeddings,
            attributes,
            aux,
            target,
            categories,
        })
    }

    pub fn aux_rows(&self) -> (Matrix, Vec<usize>) {
        (
            self.embeddings.select_rows(&self.aux),
            self.aux.iter().map(|&i| self.attributes[i]).collect(),
        )
    }

    pub fn target_rows(&self) -> (Matrix, Vec<usize>) {
        (
            self.embeddings.select_rows(&self.target),
            self.target.iter().map(|&i| self.attributes[i]).collect(),
        )
    }

    /// Same split with the auxiliary attribute ids permuted at random.
    pub fn with_shuffled_aux(&self, seed: u64) -> Self {
        let mut labels: Vec<usize> = self.aux.iter().map(|&i| self.attributes[i]).collect();
        labels.shuffle(&mut rng_from_seed(seed));
        let mut attributes = self.attributes.clone();
        for (&i, l) in self.aux.iter().zip(labels) {
            attributes[i] = l;
        }
        Self {
            attributes,
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeAttackModel {
    classifier: Classifier,
}

impl AttributeAttackModel {
    pub fn classifier(&self) -> &Classifier {
        &self.classifier
    }
}

/// Fits the attack classifier on the auxiliary rows only.
pub fn train_attribute_attack(
    ds: &AttributeDataset,
    cfg: &ClassifierConfig,
) -> Result<AttributeAttackModel> {
    let (x, y) = ds.aux_rows();
    let mut present: Vec<usize> = y.clone();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Degenerate(
            "auxiliary rows carry a single attribute category".into(),
        ));
    }
    Ok(AttributeAttackModel {
        classifier: Classifier::fit(&x, &y, ds.categories.max(2), cfg)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeInference {
    pub predictions: Vec<usize>,
    pub f1_macro: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Most likely category per row; F1 and accuracy when `truth` is given.
pub fn infer_attributes(
    model: &AttributeAttackModel,
    embeddings: &Matrix,
    truth: Option<&[usize]>,
) -> Result<AttributeInference> {
    let predictions = model.classifier.predict(embeddings)?;
    let (f1, acc) = match truth {
        Some(t) => (
            Some(f1_macro(&predictions, t, model.classifier.class_count())?),
            Some(accuracy(&predictions, t)?),
        ),
        None => (None, None),
    };
    Ok(AttributeInference {
        predictions,
        f1_macro: f1,
        accuracy: acc,
    })
}

/// Target macro-F1 of the same attack trained on permuted auxiliary
/// attributes, once per shuffle. This is the score an attack reaches without
/// any embedding/attribute signal.
pub fn permutation_null_f1(
    ds: &AttributeDataset,
    cfg: &ClassifierConfig,
    shuffles: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (tx, ty) = ds.target_rows();
    (0..shuffles)
        .map(|s| {
            let shuffled =
                ds.with_shuffled_aux(derive_seed_indexed(seed, "attribute/null", &[s as u64]));
            let model = train_attribute_attack(&shuffled, cfg)?;
            infer_attributes(&model, &tx, Some(&ty)).map(|r| r.f1_macro.unwrap_or(0.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_embeddings_are_perfectly_informative() {
        let attrs: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let rows: Vec<Vec<f64>> = attrs
            .iter()
            .map(|&a| (0..3).map(|c| f64::from(u8::from(c == a))).collect())
            .collect();
        let ds = AttributeDataset::split(Matrix::from_rows(&rows).unwrap(), attrs, 0.3, 1).unwrap();
        let model = train_attribute_attack(&ds, &ClassifierConfig::default()).unwrap();
        let (ax, ay) = ds.aux_rows();
        assert_eq!(
            infer_attributes(&model, &ax, Some(&ay)).unwrap().accuracy,
            Some(1.0)
        );
        let (tx, ty) = ds.target_rows();
        assert_eq!(
            infer_attributes(&model, &tx, Some(&ty)).unwrap().f1_macro,
            Some(1.0)
        );
    }

    #[test]
    fn single_category_aux_rejected() {
        let ds = AttributeDataset::split(Matrix::zeros(10, 2), vec![1; 10], 0.5, 0).unwrap();
        assert!(matches!(
            train_attribute_attack(&ds, &ClassifierConfig::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn split_is_disjoint_and_complete() {
        let ds = AttributeDataset::split(
            Matrix::zeros(10, 1),
            (0..10).map(|i| i % 2).collect(),
            0.3,
            2,
        )
        .unwrap();
        assert_eq!(ds.aux.len(), 3);
        let mut all: Vec<usize> = ds.aux.iter().chain(&ds.target).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn shuffling_keeps_target_labels() {
        let ds = AttributeDataset::split(
            Matrix::zeros(20, 1),
            (0..20).map(|i| i % 4).collect(),
            0.5,
            3,
        )
        .unwrap();
        let s = ds.with_shuffled_aux(9);
        assert_eq!(s.target_rows().1, ds.target_rows().1);
        let mut a = s.aux_rows().1;
        let mut b = ds.aux_rows().1;
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }

    #[test]
    fn prediction_ignores_row_order() {
        let attrs: Vec<usize> = (0..40).map(|i| i % 2).collect();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 2) as f64 + 0.01 * i as f64, (i % 5) as f64])
            .collect();
        let ds = AttributeDataset::split(Matrix::from_rows(&rows).unwrap(), attrs, 0.5, 4).unwrap();
        let model = train_attribute_attack(&ds, &ClassifierConfig::default()).unwrap();
        let (tx, _) = ds.target_rows();
        let base = infer_attributes(&model, &tx, None).unwrap().predictions;
        let rev: Vec<usize> = (0..tx.rows()).rev().collect();
        let mut flipped = infer_attributes(&model, &tx.select_rows(&rev), None)
            .unwrap()
            .predictions;
        flipped.reverse();
        assert_eq!(base, flipped);
    }
}
