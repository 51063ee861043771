//! Experiment configuration, read from TOML.
//!
//! Every table rejects unknown keys. Parse and validation errors carry the
//! dotted path of the offending key.
//!
//! Component seeds (`seed` fields of nested model and attack tables) are
//! ignored: each run seed fans out to per-component seeds by label, see
//! [`gleak_core::rng::derive_seed`].

use std::fmt;
use std::path::{Path, PathBuf};

use gleak_core::attack::{
    AutoencoderConfig, ClassifierConfig, ShadowConfig, ThresholdPolicy, WhiteboxConfig,
};
use gleak_core::gnn::GnnConfig;
use gleak_core::graph::SbmConfig;
use gleak_core::walk::WalkConfig;
use serde::{Deserialize, Serialize};

/// A configuration problem, located by key path.
#[derive(Debug, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub seeds: Vec<u64>,
    /// Fraction of nodes whose structure (reconstruction) or attribute
    /// (attribute inference) the adversary knows.
    #[serde(default = "default_aux_fraction")]
    pub aux_fraction: f64,
    /// Where reports and artifacts go unless `--out` is given.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub attacks: AttacksConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_aux_fraction() -> f64 {
    0.3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Sbm,
    Files,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// Directory with `edges.txt`, `features.csv` and optional
    /// `labels.csv` / `attributes.csv`, for `source = "files"`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub sbm: SbmConfig,
    /// Seeded node-induced subsample for graphs above this size.
    #[serde(default)]
    pub max_nodes: Option<usize>,
}

/// Node split for membership inference, as fractions of all nodes.
///
/// `val` nodes are neither members nor non-members; they form the
/// adversary's shadow-training graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.3,
            val: 0.3,
            test: 0.3,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetConfig {
    pub gnn: GnnConfig,
    pub walk: WalkConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttacksConfig {
    #[serde(default)]
    pub membership: Option<MembershipConfig>,
    #[serde(default)]
    pub reconstruction: Option<ReconstructionConfig>,
    #[serde(default)]
    pub attribute: Option<AttributeConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MembershipMode {
    Confidence,
    Shadow,
    Whitebox,
}

impl MembershipMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Confidence => "confidence",
            Self::Shadow => "shadow",
            Self::Whitebox => "whitebox",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MembershipConfig {
    pub modes: Vec<MembershipMode>,
    /// Fixed confidence threshold; the best point of the sweep when absent.
    pub threshold: Option<f64>,
    pub shadow: ShadowConfig,
    pub whitebox: WhiteboxConfig,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        Self {
            modes: vec![
                MembershipMode::Confidence,
                MembershipMode::Shadow,
                MembershipMode::Whitebox,
            ],
            threshold: None,
            shadow: ShadowConfig::default(),
            whitebox: WhiteboxConfig::default(),
        }
    }
}

/// Which pipeline produces the embeddings released for the target graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// The autoencoder's encoder, trained by the adversary on its auxiliary
    /// graph, applied to the target graph (a shared, published encoder).
    Gae,
    /// Hidden activations of a GNN node classifier trained on the target graph.
    Gnn,
    /// Random-walk embeddings of the target graph.
    Walk,
}

impl EmbeddingSource {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gae => "gae",
            Self::Gnn => "gnn",
            Self::Walk => "walk",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionConfig {
    pub source: EmbeddingSource,
    pub autoencoder: AutoencoderConfig,
    pub threshold: ThresholdPolicy,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            source: EmbeddingSource::Gae,
            autoencoder: AutoencoderConfig::default(),
            threshold: ThresholdPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttributeConfig {
    pub source: EmbeddingSource,
    pub classifier: ClassifierConfig,
    /// Shuffles for the permutation-null baseline; 0 disables it.
    pub null_shuffles: usize,
}

impl Default for AttributeConfig {
    fn default() -> Self {
        Self {
            source: EmbeddingSource::Walk,
            classifier: ClassifierConfig::default(),
            null_shuffles: 10,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text; errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| ConfigError::new("<document>", e.message()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(
                if path == "." { "<root>".into() } else { path },
                e.inner().message(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new(
                path.display().to_string(),
                format!("cannot read config: {e}"),
            )
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(ConfigError::new("seeds", "at least one seed is required"));
        }
        if !(self.aux_fraction > 0.0 && self.aux_fraction < 1.0) {
            return Err(ConfigError::new(
                "aux_fraction",
                format!("must be in (0,1), got {}", self.aux_fraction),
            ));
        }
        match self.dataset.source {
            DatasetSource::Files => {
                let Some(dir) = &self.dataset.path else {
                    return Err(ConfigError::new(
                        "dataset.path",
                        "required when source = \"files\"",
                    ));
                };
                for file in ["edges.txt", "features.csv"] {
                    if !dir.join(file).exists() {
                        return Err(ConfigError::new(
                            "dataset.path",
                            format!("{} does not exist", dir.join(file).display()),
                        ));
                    }
                }
            }
            DatasetSource::Sbm => self
                .dataset
                .sbm
                .validate()
                .map_err(|e| ConfigError::new("dataset.sbm", e))?,
        }
        if self.dataset.max_nodes == Some(0) {
            return Err(ConfigError::new("dataset.max_nodes", "must be positive"));
        }
        let s = &self.split;
        for (key, v) in [
            ("split.train", s.train),
            ("split.val", s.val),
            ("split.test", s.test),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ConfigError::new(key, format!("must be in [0,1], got {v}")));
            }
        }
        if s.train + s.val + s.test > 1.0 + 1e-9 {
            return Err(ConfigError::new("split", "train + val + test exceeds 1"));
        }
        self.target
            .gnn
            .validate()
            .map_err(|e| ConfigError::new("target.gnn", e))?;
        self.target
            .walk
            .validate()
            .map_err(|e| ConfigError::new("target.walk", e))?;
        let a = &self.attacks;
        if a.membership.is_none() && a.reconstruction.is_none() && a.attribute.is_none() {
            return Err(ConfigError::new("attacks", "no attack configured"));
        }
        if let Some(m) = &a.membership {
            if m.modes.is_empty() {
                return Err(ConfigError::new(
                    "attacks.membership.modes",
                    "list at least one mode",
                ));
            }
            if s.train == 0.0 || s.test == 0.0 {
                return Err(ConfigError::new(
                    "split",
                    "membership inference needs train and test nodes",
                ));
            }
            if m.modes.contains(&MembershipMode::Shadow) && s.val == 0.0 {
                return Err(ConfigError::new(
                    "split.val",
                    "the shadow attack trains on validation nodes",
                ));
            }
            if let Some(t) = m.threshold {
                if !(0.0..=1.0).contains(&t) {
                    return Err(ConfigError::new(
                        "attacks.membership.threshold",
                        format!("must be in [0,1], got {t}"),
                    ));
                }
            }
        }
        if let Some(r) = &a.reconstruction {
            let ae = &r.autoencoder;
            if ae.learning_rate.is_nan()
                || ae.learning_rate <= 0.0
                || ae.hidden == 0
                || ae.embedding_dim == 0
            {
                return Err(ConfigError::new(
                    "attacks.reconstruction.autoencoder",
                    "needs positive widths and learning rate",
                ));
            }
            let bad = match r.threshold {
                ThresholdPolicy::Fixed(t) => !(0.0..=1.0).contains(&t),
                ThresholdPolicy::MatchDensity(d) => !(0.0..=1.0).contains(&d),
            };
            if bad {
                return Err(ConfigError::new(
                    "attacks.reconstruction.threshold",
                    "value must be in [0,1]",
                ));
            }
        }
        if let Some(at) = &a.attribute {
            if at.source == EmbeddingSource::Gae {
                return Err(ConfigError::new(
                    "attacks.attribute.source",
                    "must be \"walk\" or \"gnn\"",
                ));
            }
            if at.classifier.learning_rate.is_nan()
                || at.classifier.learning_rate <= 0.0
                || at.classifier.hidden == 0
            {
                return Err(ConfigError::new(
                    "attacks.attribute.classifier",
                    "needs a positive width and learning rate",
                ));
            }
        }
        Ok(())
    }

    /// The output directory, preferring an explicit override.
    pub fn output_dir(&self, override_dir: Option<&Path>) -> PathBuf {
        override_dir
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("gleak-out"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seeds = [1, 2]
        [dataset]
        source = "sbm"
        [attacks.membership]
    "#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.aux_fraction, 0.3);
        assert_eq!(cfg.attacks.membership.unwrap().modes.len(), 3);
        assert!(cfg.attacks.reconstruction.is_none());
    }

    #[test]
    fn unknown_key_reports_its_path() {
        let text = MINIMAL.replace("[attacks.membership]", "[attacks.membership]\nmodez = []");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.path, "attacks.membership.modez");
        assert!(err.message.contains("modez"), "{err}");

        let text = MINIMAL.replace(
            "source = \"sbm\"",
            "source = \"sbm\"\n[dataset.sbm]\np_intra = \"high\"",
        );
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.path, "dataset.sbm.p_intra");
    }

    #[test]
    fn validation_names_the_key() {
        let err = ExperimentConfig::from_toml(&MINIMAL.replace("[1, 2]", "[]")).unwrap_err();
        assert_eq!(err.path, "seeds");
        let err =
            ExperimentConfig::from_toml(&format!("aux_fraction = 1.5\n{MINIMAL}")).unwrap_err();
        assert_eq!(err.path, "aux_fraction");
        let text = MINIMAL.replace(
            "source = \"sbm\"",
            "source = \"files\"\npath = \"/nonexistent\"",
        );
        assert_eq!(
            ExperimentConfig::from_toml(&text).unwrap_err().path,
            "dataset.path"
        );
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
            seeds = [3]
            [dataset]
            source = "sbm"
            [attacks.reconstruction]
            source = "walk"
            threshold = { policy = "match_density", value = 0.05 }
            [attacks.reconstruction.autoencoder]
            decoder = "bilinear"
            [attacks.attribute]
            null_shuffles = 0
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(
            cfg.attacks.reconstruction.as_ref().unwrap().threshold,
            ThresholdPolicy::MatchDensity(0.05)
        );
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
