//! Blackbox membership inference: shadow-model and confidence-threshold
//! attacks.
//!
//! Members are the target's training nodes, queried on the training graph
//! they were fitted on. Non-members are test nodes, queried on the subgraph
//! induced by the test mask. Validation nodes are on neither side. Both pools are subsampled to the same size so a random guess
//! scores 0.5.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, ClassifierConfig};
use super::AttackResult;
use crate::error::{Error, Result};
use crate::gnn::{train, GnnConfig, NodeClassifier};
use crate::graph::{Graph, Masks, Subgraph};
use crate::metrics::MetricBundle;
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::Matrix;

/// The only surface a blackbox adversary may touch: class probabilities for
/// nodes of a graph.
pub trait PredictionOracle: Sync {
    fn predict(&self, g: &Graph, nodes: &[usize]) -> Result<Matrix>;
    fn class_count(&self) -> usize;
}

impl PredictionOracle for NodeClassifier {
    fn predict(&self, g: &Graph, nodes: &[usize]) -> Result<Matrix> {
        NodeClassifier::predict(self, g, nodes)
    }

    fn class_count(&self) -> usize {
        NodeClassifier::class_count(self)
    }
}

/// Balanced member/non-member query set.
#[derive(Clone, Debug)]
pub struct EvaluationSet {
    pub member_graph: Subgraph,
    pub nonmember_graph: Subgraph,
    /// Local ids in `member_graph`.
    pub members: Vec<usize>,
    /// Local ids in `nonmember_graph`.
    pub nonmembers: Vec<usize>,
}

impl EvaluationSet {
    /// Parent-graph ids, members first.
    pub fn original_ids(&self) -> Vec<usize> {
        self.members
            .iter()
            .map(|&v| self.member_graph.original_ids[v])
            .chain(
                self.nonmembers
                    .iter()
                    .map(|&v| self.nonmember_graph.original_ids[v]),
            )
            .collect()
    }

    /// Membership bits matching [`EvaluationSet::original_ids`].
    pub fn truth(&self) -> Vec<bool> {
        std::iter::repeat_n(true, self.members.len())
            .chain(std::iter::repeat_n(false, self.nonmembers.len()))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.members.len() + self.nonmembers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws `min(#train, #test)` members and as many non-members uniformly.
pub fn balanced_evaluation_set(g: &Graph, seed: u64) -> Result<EvaluationSet> {
    let member_graph = g.train_subgraph()?;
    let nonmember_graph = g.heldout_subgraph()?;
    let train_local: Vec<usize> = (0..member_graph.graph.node_count()).collect();
    let test_local = nonmember_graph.graph.masks().test_nodes();
    let size = train_local.len().min(test_local.len());
    if size == 0 {
        return Err(Error::EmptyInput(
            "membership evaluation needs train and test nodes",
        ));
    }
    let mut rng = rng_from_seed(derive_seed(seed, "membership/eval"));
    let pick = |mut pool: Vec<usize>, rng: &mut crate::rng::Rng| {
        pool.shuffle(rng);
        pool.truncate(size);
        pool.sort_unstable();
        pool
    };
    let members = pick(train_local, &mut rng);
    let nonmembers = pick(test_local, &mut rng);
    Ok(EvaluationSet {
        member_graph,
        nonmember_graph,
        members,
        nonmembers,
    })
}

/// Oracle outputs for the evaluation set, members first.
pub fn query_predictions(oracle: &dyn PredictionOracle, eval: &EvaluationSet) -> Result<Matrix> {
    let m = oracle.predict(&eval.member_graph.graph, &eval.members)?;
    let o = oracle.predict(&eval.nonmember_graph.graph, &eval.nonmembers)?;
    let mut data = m.into_data();
    data.extend(o.into_data());
    Matrix::from_vec(eval.len(), oracle.class_count(), data)
}

/// Each row sorted in descending order.
pub fn sorted_prediction_rows(probs: &Matrix) -> Matrix {
    let mut out = probs.clone();
    for r in 0..out.rows() {
        out.row_mut(r).sort_by(|a, b| b.total_cmp(a));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPoint {
    pub threshold: f64,
    pub accuracy: f64,
}

fn check_balanced(truth: &[bool]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("membership evaluation set"));
    }
    let members = truth.iter().filter(|&&t| t).count();
    if 2 * members != truth.len() {
        return Err(Error::invalid(format!(
            "evaluation set is unbalanced: {members} members of {}",
            truth.len()
        )));
    }
    Ok(())
}

/// Predicts "member" when the highest class probability is at least the
/// threshold.
///
/// Accuracy is always traced over thresholds `0.00, 0.01, ..., 1.00`. With no
/// threshold given, the reported accuracy is the best point of that curve.
pub fn confidence_attack(
    probs: &Matrix,
    truth: &[bool],
    threshold: Option<f64>,
) -> Result<AttackResult> {
    check_balanced(truth)?;
    if probs.rows() != truth.len() {
        return Err(Error::invalid(format!(
            "{} prediction rows for {} labels",
            probs.rows(),
            truth.len()
        )));
    }
    let conf: Vec<f64> = (0..probs.rows())
        .map(|r| {
            probs
                .row(r)
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let acc_at = |t: f64| {
        conf.iter()
            .zip(truth)
            .filter(|(c, m)| (**c >= t) == **m)
            .count() as f64
            / truth.len() as f64
    };
    let curve: Vec<ThresholdPoint> = (0..=100)
        .map(|k| {
            let t = k as f64 / 100.0;
            ThresholdPoint {
                threshold: t,
                accuracy: acc_at(t),
            }
        })
        .collect();
    let tau = match threshold {
        Some(t) => t,
        None => {
            curve
                .iter()
                .fold(
                    curve[0],
                    |best, p| if p.accuracy > best.accuracy { *p } else { best },
                )
                .threshold
        }
    };
    let decisions: Vec<bool> = conf.iter().map(|&c| c >= tau).collect();
    let metrics = MetricBundle::binary(&conf, &decisions, truth)?;
    Ok(AttackResult {
        attack: "confidence".into(),
        metrics,
        threshold: Some(tau),
        threshold_curve: Some(curve),
        scores: conf,
        decisions,
        truth: truth.to_vec(),
        ..AttackResult::default()
    }
    .param("threshold_given", threshold.is_some()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShadowConfig {
    /// Fraction of the auxiliary nodes the shadow model trains on.
    pub shadow_train_fraction: f64,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl Default for ShadowConfig {
    fn default() -> Self {
        Self {
            shadow_train_fraction: 0.5,
            classifier: ClassifierConfig::default(),
            seed: 0,
        }
    }
}

/// Shadow-model attack.
///
/// A substitute model is trained on part of the auxiliary graph; its sorted
/// prediction vectors on its own training nodes ("member") and on the rest
/// of the auxiliary graph ("non-member") train a binary attack classifier,
/// which then labels the target's outputs on `eval`.
pub fn shadow_attack(
    target: &dyn PredictionOracle,
    eval: &EvaluationSet,
    aux: &Graph,
    shadow_cfg: &GnnConfig,
    cfg: &ShadowConfig,
) -> Result<AttackResult> {
    let truth = eval.truth();
    check_balanced(&truth)?;
    let n = aux.node_count();
    if n < 4 {
        return Err(Error::invalid(format!(
            "auxiliary graph of {n} nodes is too small to split"
        )));
    }
    if aux.class_count() != target.class_count() {
        return Err(Error::invalid(format!(
            "auxiliary graph has {} classes, target model {}",
            aux.class_count(),
            target.class_count()
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, "shadow/split")));
    let k = ((cfg.shadow_train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut masks = Masks::empty(n);
    for (pos, &v) in order.iter().enumerate() {
        if pos < k {
            masks.train[v] = true;
        } else {
            masks.test[v] = true;
        }
    }
    let shadow_graph = aux.clone().with_masks(masks)?;
    let shadow_model_cfg = GnnConfig {
        seed: derive_seed(cfg.seed, "shadow/model"),
        ..shadow_cfg.clone()
    };
    let shadow = train(&shadow_graph, &shadow_model_cfg)?;
    let shadow_eval = balanced_evaluation_set(&shadow_graph, derive_seed(cfg.seed, "shadow/eval"))?;
    let synth_x = sorted_prediction_rows(&query_predictions(&shadow, &shadow_eval)?);
    let synth_y: Vec<usize> = shadow_eval.truth().into_iter().map(usize::from).collect();
    let clf_cfg = ClassifierConfig {
        seed: derive_seed(cfg.seed, "shadow/attack"),
        ..cfg.classifier.clone()
    };
    let attack = Classifier::fit(&synth_x, &synth_y, 2, &clf_cfg)?;

    let target_x = sorted_prediction_rows(&query_predictions(target, eval)?);
    let p = attack.predict_proba(&target_x)?;
    let scores: Vec<f64> = (0..p.rows()).map(|r| p[(r, 1)]).collect();
    let decisions: Vec<bool> = scores.iter().map(|&s| s >= 0.5).collect();
    let metrics = MetricBundle::binary(&scores, &decisions, &truth)?;
    Ok(AttackResult {
        attack: "shadow".into(),
        metrics,
        scores,
        decisions,
        truth,
        ..AttackResult::default()
    }
    .param("classifier", cfg.classifier.kind)
    .param("shadow_train_nodes", k)
    .param("shadow_out_nodes", n - k))
}
