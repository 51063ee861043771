//! Privacy attacks against released predictions and embeddings.

pub mod attribute;
pub mod classifier;
pub mod kmeans;
pub mod membership;
pub mod reconstruction;
pub mod whitebox;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricBundle;

pub use attribute::{
    infer_attributes, permutation_null_f1, train_attribute_attack, AttributeAttackModel,
    AttributeDataset, AttributeInference,
};
pub use classifier::{Classifier, ClassifierConfig, ClassifierKind};
pub use kmeans::{kmeans, KMeansResult};
pub use membership::{
    balanced_evaluation_set, confidence_attack, query_predictions, shadow_attack,
    sorted_prediction_rows, EvaluationSet, PredictionOracle, ShadowConfig, ThresholdPoint,
};
pub use reconstruction::{
    decode_inner_product, evaluation_pairs, reconstruct_target, train_autoencoder, train_decoder,
    AutoencoderConfig, DecoderMode, GraphAutoencoder, LinkInference, ReconstructionLoss,
    ReconstructionResult, ThresholdPolicy,
};
pub use whitebox::{pick_anchors, whitebox_attack, WhiteboxConfig};

/// Outcome of one membership or attribute attack.
///
/// Per-node vectors are kept in memory for analysis but left out of the
/// serialized form.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub attack: String,
    pub dataset: String,
    pub arch: String,
    pub seed: u64,
    #[serde(flatten)]
    pub metrics: MetricBundle,
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold_curve: Option<Vec<ThresholdPoint>>,
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(skip)]
    pub scores: Vec<f64>,
    #[serde(skip)]
    pub decisions: Vec<bool>,
    #[serde(skip)]
    pub truth: Vec<bool>,
}

impl AttackResult {
    pub fn accuracy(&self) -> f64 {
        self.metrics.accuracy.unwrap_or(f64::NAN)
    }

    pub fn advantage(&self) -> f64 {
        self.metrics.advantage.unwrap_or(f64::NAN)
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(
            key.to_string(),
            serde_json::to_value(value).expect("plain data serializes"),
        );
        self
    }
}
