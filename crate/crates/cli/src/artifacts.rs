//! On-disk layout of the target side of an experiment.
//!
//! `gleak train` writes, under the output directory:
//!
//! ```text
//! config.toml
//! seed-<s>/graph/{edges.txt,features.csv,labels.csv,attributes.csv}
//! seed-<s>/masks.csv
//! seed-<s>/target.ckpt                 (membership target model)
//! seed-<s>/reconstruction_target.csv   (released target-graph embeddings)
//! seed-<s>/attribute_embeddings.csv    (released embeddings of all nodes)
//! seed-<s>/train-errors.json           (only if a stage failed)
//! ```
//!
//! Optional files are present only when the corresponding attack is
//! configured.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gleak_core::gnn::{load_checkpoint, save_checkpoint};
use gleak_core::graph::{load_graph, load_masks, save_graph, save_masks, GraphFiles};
use gleak_core::{EmbeddingMatrix, Matrix};

use crate::config::{EmbeddingSource, ExperimentConfig};
use crate::pipeline::TargetArtifacts;
use crate::report::StageError;

pub const CONFIG_FILE: &str = "config.toml";
const MASKS: &str = "masks.csv";
const TARGET: &str = "target.ckpt";
const RECONSTRUCTION: &str = "reconstruction_target.csv";
const ATTRIBUTE: &str = "attribute_embeddings.csv";
const ERRORS: &str = "train-errors.json";

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

/// Fails with a message naming `path` and the command that creates it.
pub fn require(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!(
            "missing artifact {}; run `gleak train` with the same configuration and output directory first",
            path.display()
        );
    }
    Ok(())
}

fn save_embeddings(m: &Matrix, path: &Path) -> Result<()> {
    EmbeddingMatrix::dense(m.clone())?.save_csv(path)?;
    Ok(())
}

fn load_embeddings(path: &Path) -> Result<Matrix> {
    Ok(EmbeddingMatrix::load_csv(path)?.into_vectors())
}

pub fn save(arts: &TargetArtifacts, out: &Path) -> Result<()> {
    let dir = seed_dir(out, arts.seed);
    let graph_dir = dir.join("graph");
    fs::create_dir_all(&graph_dir).with_context(|| format!("creating {}", graph_dir.display()))?;
    save_graph(&arts.graph, &GraphFiles::for_writing(&graph_dir))?;
    save_masks(arts.graph.masks(), &dir.join(MASKS))?;
    if let Some(model) = &arts.target {
        save_checkpoint(model, &dir.join(TARGET))?;
    }
    if let Some(z) = &arts.reconstruction_embeddings {
        save_embeddings(z, &dir.join(RECONSTRUCTION))?;
    }
    if let Some(z) = &arts.attribute_embeddings {
        save_embeddings(z, &dir.join(ATTRIBUTE))?;
    }
    let errors = dir.join(ERRORS);
    if arts.errors.is_empty() {
        if errors.exists() {
            fs::remove_file(&errors).with_context(|| format!("removing {}", errors.display()))?;
        }
    } else {
        fs::write(&errors, serde_json::to_string_pretty(&arts.errors)?)
            .with_context(|| format!("writing {}", errors.display()))?;
    }
    Ok(())
}

/// Which artifacts an attack needs.
#[derive(Clone, Copy, Debug, Default)]
pub struct Needs {
    pub target: bool,
    pub reconstruction: bool,
    pub attribute: bool,
}

impl Needs {
    pub fn for_config(
        cfg: &ExperimentConfig,
        membership: bool,
        reconstruction: bool,
        attribute: bool,
    ) -> Self {
        Self {
            target: membership && cfg.attacks.membership.is_some(),
            reconstruction: reconstruction
                && cfg
                    .attacks
                    .reconstruction
                    .as_ref()
                    .is_some_and(|r| r.source != EmbeddingSource::Gae),
            attribute: attribute && cfg.attacks.attribute.is_some(),
        }
    }
}

/// Reads one seed's artifacts. A file whose producing stage failed during
/// `gleak train` is treated as absent; any other missing file is an error.
pub fn load(out: &Path, seed: u64, needs: Needs) -> Result<TargetArtifacts> {
    let dir = seed_dir(out, seed);
    let errors_path = dir.join(ERRORS);
    let errors: Vec<StageError> = if errors_path.exists() {
        let text = fs::read_to_string(&errors_path)
            .with_context(|| format!("reading {}", errors_path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", errors_path.display()))?
    } else {
        Vec::new()
    };
    let failed = |stage: &str| errors.iter().any(|e| e.stage == stage);
    let wanted = |needed: bool, stage: &str, path: &Path| -> Result<bool> {
        if !needed || (failed(stage) && !path.exists()) {
            return Ok(false);
        }
        require(path)?;
        Ok(true)
    };

    let graph_dir = dir.join("graph");
    let files = GraphFiles::in_dir(&graph_dir);
    require(&files.edges)?;
    require(&files.features)?;
    let graph = load_graph(&files)?;
    let masks_path = dir.join(MASKS);
    require(&masks_path)?;
    let masks = load_masks(&masks_path, graph.node_count())?;
    let graph = graph.with_masks(masks)?;

    let path = dir.join(TARGET);
    let target = if wanted(needs.target, "train/membership", &path)? {
        Some(load_checkpoint(&path)?)
    } else {
        None
    };
    let path = dir.join(RECONSTRUCTION);
    let reconstruction_embeddings = if wanted(needs.reconstruction, "train/reconstruction", &path)?
    {
        Some(load_embeddings(&path)?)
    } else {
        None
    };
    let path = dir.join(ATTRIBUTE);
    let attribute_embeddings = if wanted(needs.attribute, "train/attribute", &path)? {
        Some(load_embeddings(&path)?)
    } else {
        None
    };
    Ok(TargetArtifacts {
        seed,
        graph,
        target,
        reconstruction_embeddings,
        attribute_embeddings,
        errors,
    })
}
