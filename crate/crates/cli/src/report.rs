//! Audit reports: per-seed results, aggregates and CSV tables.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use gleak_core::attack::AttackResult;
use gleak_core::metrics::MetricBundle;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSummary {
    pub arch: String,
    pub num_layers: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

impl TargetSummary {
    pub fn generalization_gap(&self) -> f64 {
        self.train_accuracy - self.test_accuracy
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionSummary {
    pub source: String,
    pub decoder: String,
    pub aux_fraction: f64,
    pub decoder_parameters: usize,
    pub target_nodes: usize,
    pub target_edges: usize,
    pub threshold: f64,
    pub predicted_edges: usize,
    pub auc: f64,
    pub average_precision: f64,
    /// AUC on the adversary's own auxiliary graph after training.
    pub aux_training_auc: f64,
    pub link_inference: MetricBundle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeSummary {
    pub source: String,
    pub aux_fraction: f64,
    pub categories: usize,
    pub f1_macro: f64,
    pub accuracy: f64,
    /// Majority-class macro-F1 on the target rows.
    pub majority_f1: f64,
    /// Mean target macro-F1 of the attack trained on shuffled auxiliary
    /// attributes; absent when no shuffles were requested.
    pub null_f1: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub dataset: String,
    pub nodes: usize,
    pub edges: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<TargetSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub membership: Vec<AttackResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reconstruction: Option<ReconstructionSummary>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub attribute: Option<AttributeSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub errors: Vec<StageError>,
    pub timings: Timings,
}

fn put(out: &mut BTreeMap<String, f64>, key: String, v: Option<f64>) {
    if let Some(v) = v {
        out.insert(key, v);
    }
}

fn put_bundle(out: &mut BTreeMap<String, f64>, prefix: &str, m: &MetricBundle) {
    put(out, format!("{prefix}/accuracy"), m.accuracy);
    put(out, format!("{prefix}/advantage"), m.advantage);
    put(
        out,
        format!("{prefix}/accuracy_above_chance"),
        m.accuracy_above_chance,
    );
    put(out, format!("{prefix}/auc"), m.auc);
    put(
        out,
        format!("{prefix}/average_precision"),
        m.average_precision,
    );
    put(out, format!("{prefix}/f1_macro"), m.f1_macro);
}

impl SeedReport {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            dataset: String::new(),
            nodes: 0,
            edges: 0,
            target: None,
            membership: Vec::new(),
            reconstruction: None,
            attribute: None,
            errors: Vec::new(),
            timings: Timings::default(),
        }
    }

    /// Every scalar metric of this seed under a `group/name` key.
    pub fn flat_metrics(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let Some(t) = &self.target {
            out.insert("target/train_accuracy".into(), t.train_accuracy);
            out.insert("target/test_accuracy".into(), t.test_accuracy);
            out.insert("target/generalization_gap".into(), t.generalization_gap());
        }
        for r in &self.membership {
            put_bundle(&mut out, &format!("membership/{}", r.attack), &r.metrics);
        }
        if let Some(r) = &self.reconstruction {
            let p = format!("reconstruction/{}/{}", r.source, r.decoder);
            out.insert(format!("{p}/auc"), r.auc);
            out.insert(format!("{p}/average_precision"), r.average_precision);
            out.insert(format!("{p}/aux_training_auc"), r.aux_training_auc);
            put_bundle(
                &mut out,
                &format!("link_inference/{}/{}", r.source, r.decoder),
                &r.link_inference,
            );
        }
        if let Some(a) = &self.attribute {
            let p = format!("attribute/{}", a.source);
            out.insert(format!("{p}/f1_macro"), a.f1_macro);
            out.insert(format!("{p}/accuracy"), a.accuracy);
            out.insert(format!("{p}/majority_f1"), a.majority_f1);
            put(&mut out, format!("{p}/null_f1"), a.null_f1);
        }
        out
    }
}

/// Mean and sample standard deviation of one metric across seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

/// Aggregates every metric that appears in at least one seed.
pub fn aggregate(seeds: &[SeedReport]) -> BTreeMap<String, Aggregate> {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in seeds {
        for (k, v) in s.flat_metrics() {
            values.entry(k).or_default().push(v);
        }
    }
    values
        .into_iter()
        .map(|(k, v)| (k, Aggregate::of(&v)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedReport>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub timings: Timings,
}

impl AuditReport {
    pub fn new(
        command: &str,
        config: ExperimentConfig,
        seeds: Vec<SeedReport>,
        seconds: f64,
    ) -> Self {
        let aggregates = aggregate(&seeds);
        Self {
            version: gleak_core::VERSION.into(),
            command: command.into(),
            config,
            seeds,
            aggregates,
            timings: Timings { seconds },
        }
    }

    pub fn has_errors(&self) -> bool {
        self.seeds.iter().any(|s| !s.errors.is_empty())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(path, self.to_json() + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing report {}", path.display()))
    }
}

/// `metric,mean,std,n` rows, one per aggregated metric.
pub fn aggregates_csv(aggregates: &BTreeMap<String, Aggregate>) -> String {
    let mut out = String::from("metric,mean,std,n\n");
    for (k, a) in aggregates {
        out.push_str(&format!("{k},{},{},{}\n", a.mean, a.std, a.n));
    }
    out
}

/// Removes every `timings` member, recursively.
pub fn strip_timings(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("timings");
            map.values_mut().for_each(strip_timings);
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregate_uses_sample_std() {
        let a = Aggregate::of(&[1.0, 2.0, 3.0]);
        assert_eq!(a.mean, 2.0);
        assert_eq!(a.std, 1.0);
        assert_eq!(Aggregate::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn strip_removes_nested_timings() {
        let mut v = serde_json::json!({"timings": 1, "seeds": [{"timings": 2, "x": 3}]});
        strip_timings(&mut v);
        assert_eq!(v, serde_json::json!({"seeds": [{"x": 3}]}));
    }

    #[test]
    fn flat_metrics_cover_attribute_and_target() {
        let mut s = SeedReport::new(0);
        s.target = Some(TargetSummary {
            arch: "gcn".into(),
            num_layers: 2,
            train_accuracy: 0.9,
            test_accuracy: 0.7,
        });
        s.attribute = Some(AttributeSummary {
            source: "walk".into(),
            aux_fraction: 0.3,
            categories: 2,
            f1_macro: 0.8,
            accuracy: 0.85,
            majority_f1: 0.33,
            null_f1: None,
        });
        let m = s.flat_metrics();
        assert!((m["target/generalization_gap"] - 0.2).abs() < 1e-12);
        assert_eq!(m["attribute/walk/f1_macro"], 0.8);
        assert!(!m.contains_key("attribute/walk/null_f1"));
    }
}
