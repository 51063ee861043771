//! Per-seed experiment pipeline.
//!
//! A seed runs in two halves. The target side ([`TargetArtifacts::build`])
//! samples the dataset, splits it, trains the target models and computes
//! the embeddings the target releases. The adversary side
//! ([`run_attacks`]) consumes only those artifacts. `gleak train` persists
//! the first half and `gleak attack` runs the second, so the two commands
//! together reproduce `gleak run`.

use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use gleak_core::attack::{
    balanced_evaluation_set, confidence_attack, infer_attributes, permutation_null_f1,
    pick_anchors, query_predictions, reconstruct_target, shadow_attack, train_attribute_attack,
    train_autoencoder, train_decoder, whitebox_attack, AttackResult, AttributeDataset,
    ClassifierConfig, EvaluationSet, ShadowConfig, WhiteboxConfig,
};
use gleak_core::gnn::{train, NodeClassifier};
use gleak_core::graph::{
    generate_sbm, load_graph, make_inductive_masks, split_disjoint, subsample, GraphFiles,
};
use gleak_core::metrics::majority_f1;
use gleak_core::rng::derive_seed;
use gleak_core::walk::embed;
use gleak_core::{Graph, Masks, Matrix};

use crate::config::{
    AttributeConfig, DatasetSource, EmbeddingSource, ExperimentConfig, MembershipConfig,
    MembershipMode, ReconstructionConfig,
};
use crate::report::{
    AttributeSummary, ReconstructionSummary, SeedReport, StageError, TargetSummary,
};

/// Which attacks a pipeline invocation runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttackSelection {
    pub membership: bool,
    pub reconstruction: bool,
    pub attribute: bool,
}

impl AttackSelection {
    pub const ALL: Self = Self {
        membership: true,
        reconstruction: true,
        attribute: true,
    };
}

/// Short dataset label used in reports.
pub fn dataset_name(cfg: &ExperimentConfig) -> String {
    match cfg.dataset.source {
        DatasetSource::Sbm => "sbm".into(),
        DatasetSource::Files => cfg
            .dataset
            .path
            .as_ref()
            .and_then(|p| p.file_name())
            .map_or_else(|| "files".into(), |s| s.to_string_lossy().into_owned()),
    }
}

/// Reads the dataset files once; SBM graphs are sampled per seed instead.
pub fn load_base_graph(cfg: &ExperimentConfig) -> Result<Option<Graph>> {
    match (&cfg.dataset.source, &cfg.dataset.path) {
        (DatasetSource::Files, Some(dir)) => Ok(Some(
            load_graph(&GraphFiles::in_dir(dir))
                .with_context(|| format!("loading dataset from {}", dir.display()))?,
        )),
        _ => Ok(None),
    }
}

/// The seed's graph, with membership masks applied.
pub fn seed_graph(cfg: &ExperimentConfig, base: Option<&Graph>, seed: u64) -> Result<Graph> {
    let g = match base {
        Some(g) => g.clone(),
        None => generate_sbm(&cfg.dataset.sbm, derive_seed(seed, "dataset"))?,
    };
    let g = match cfg.dataset.max_nodes {
        Some(max) if g.node_count() > max => {
            subsample(&g, max, derive_seed(seed, "dataset/subsample"))?.graph
        }
        _ => g,
    };
    let n = g.node_count() as f64;
    let count = |f: f64| (f * n).round() as usize;
    let s = &cfg.split;
    Ok(make_inductive_masks(
        &g,
        count(s.train),
        count(s.val),
        count(s.test),
        derive_seed(seed, "membership/split"),
    )?)
}

/// Trains a GNN on every node of `g` and returns its released embeddings.
fn gnn_embeddings(cfg: &ExperimentConfig, g: &Graph, seed: u64) -> Result<Matrix> {
    if g.labels().is_none() {
        bail!("gnn embeddings need node labels");
    }
    let n = g.node_count();
    let mut masks = Masks::empty(n);
    masks.train = vec![true; n];
    let g = g.clone().with_masks(masks)?;
    let gnn_cfg = gleak_core::gnn::GnnConfig {
        seed,
        ..cfg.target.gnn.clone()
    };
    let model = train(&g, &gnn_cfg)?;
    Ok(model
        .extract_embeddings(&g, gnn_cfg.embedding_layer)?
        .into_vectors())
}

/// Embeddings of `g` produced by `source` (gnn or walk).
pub fn released_embeddings(
    cfg: &ExperimentConfig,
    source: EmbeddingSource,
    g: &Graph,
    seed: u64,
) -> Result<Matrix> {
    match source {
        EmbeddingSource::Gnn => gnn_embeddings(cfg, g, seed),
        EmbeddingSource::Walk => {
            let walk = gleak_core::walk::WalkConfig {
                seed,
                ..cfg.target.walk.clone()
            };
            Ok(embed(g, &walk)?.embedding.into_vectors())
        }
        EmbeddingSource::Gae => Err(anyhow!("gae embeddings come from the adversary's encoder")),
    }
}

/// Node-induced auxiliary and target graphs for reconstruction.
pub fn reconstruction_split(g: &Graph, aux_fraction: f64, seed: u64) -> Result<(Graph, Graph)> {
    let (aux, target) = split_disjoint(g, aux_fraction, derive_seed(seed, "reconstruction/split"))?;
    Ok((aux.graph, target.graph))
}

/// Everything the target side hands to the adversary for one seed.
#[derive(Clone, Debug)]
pub struct TargetArtifacts {
    pub seed: u64,
    pub graph: Graph,
    /// Membership target model, trained on the train-mask subgraph.
    pub target: Option<NodeClassifier>,
    /// Released embeddings of the reconstruction target graph.
    pub reconstruction_embeddings: Option<Matrix>,
    /// Released embeddings of every node, for attribute inference.
    pub attribute_embeddings: Option<Matrix>,
    pub errors: Vec<StageError>,
}

fn record<T>(errors: &mut Vec<StageError>, stage: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(StageError {
                stage: stage.into(),
                message: format!("{e:#}"),
            });
            None
        }
    }
}

impl TargetArtifacts {
    pub fn build(cfg: &ExperimentConfig, base: Option<&Graph>, seed: u64) -> Result<Self> {
        let graph = seed_graph(cfg, base, seed)?;
        let mut errors = Vec::new();
        let target = match &cfg.attacks.membership {
            Some(_) => {
                let gnn_cfg = gleak_core::gnn::GnnConfig {
                    seed: derive_seed(seed, "membership/target"),
                    ..cfg.target.gnn.clone()
                };
                record(
                    &mut errors,
                    "train/membership",
                    train(&graph, &gnn_cfg).map_err(Into::into),
                )
            }
            None => None,
        };
        let reconstruction_embeddings = match &cfg.attacks.reconstruction {
            Some(r) if r.source != EmbeddingSource::Gae => {
                let released =
                    reconstruction_split(&graph, cfg.aux_fraction, seed).and_then(|(_, t)| {
                        released_embeddings(
                            cfg,
                            r.source,
                            &t,
                            derive_seed(seed, "reconstruction/target"),
                        )
                    });
                record(&mut errors, "train/reconstruction", released)
            }
            _ => None,
        };
        let attribute_embeddings = match &cfg.attacks.attribute {
            Some(a) => record(
                &mut errors,
                "train/attribute",
                released_embeddings(cfg, a.source, &graph, derive_seed(seed, "attribute/target")),
            ),
            None => None,
        };
        Ok(Self {
            seed,
            graph,
            target,
            reconstruction_embeddings,
            attribute_embeddings,
            errors,
        })
    }
}

fn stacked_embeddings(model: &NodeClassifier, eval: &EvaluationSet) -> Result<Matrix> {
    let layer = model.config().embedding_layer;
    let m = model.extract_embeddings(&eval.member_graph.graph, layer)?;
    let o = model.extract_embeddings(&eval.nonmember_graph.graph, layer)?;
    let mut data = m.vectors().select_rows(&eval.members).into_data();
    data.extend(o.vectors().select_rows(&eval.nonmembers).into_data());
    Ok(Matrix::from_vec(eval.len(), m.dim(), data)?)
}

/// One result per requested mode, in mode order.
pub fn run_membership(
    cfg: &ExperimentConfig,
    mc: &MembershipConfig,
    g: &Graph,
    model: &NodeClassifier,
    seed: u64,
) -> Result<Vec<(MembershipMode, Result<AttackResult>)>> {
    let eval = balanced_evaluation_set(g, derive_seed(seed, "membership/eval"))?;
    let truth = eval.truth();
    let mut modes = mc.modes.clone();
    modes.sort();
    modes.dedup();
    let results = modes
        .into_iter()
        .map(|mode| {
            let r: Result<AttackResult> = (|| match mode {
                MembershipMode::Confidence => {
                    let probs = query_predictions(model, &eval)?;
                    Ok(confidence_attack(&probs, &truth, mc.threshold)?)
                }
                MembershipMode::Shadow => {
                    let aux = g.induced_subgraph(&g.masks().val_nodes())?.graph;
                    let shadow_cfg = ShadowConfig {
                        seed: derive_seed(seed, "membership/shadow"),
                        ..mc.shadow.clone()
                    };
                    Ok(shadow_attack(
                        model,
                        &eval,
                        &aux,
                        model.config(),
                        &shadow_cfg,
                    )?)
                }
                MembershipMode::Whitebox => {
                    let wb = WhiteboxConfig {
                        seed: derive_seed(seed, "membership/whitebox"),
                        ..mc.whitebox.clone()
                    };
                    let anchors =
                        pick_anchors(&truth, wb.anchor_members, wb.anchor_nonmembers, wb.seed)?;
                    let emb = stacked_embeddings(model, &eval)?;
                    Ok(whitebox_attack(&emb, &truth, &anchors, &wb)?
                        .param("embedding_layer", model.config().embedding_layer))
                }
            })();
            let r = r.map(|mut res| {
                res.dataset = dataset_name(cfg);
                res.arch = model.config().arch.name().into();
                res.seed = seed;
                res.param("num_layers", model.config().num_layers)
            });
            (mode, r)
        })
        .collect();
    Ok(results)
}

pub fn run_reconstruction(
    cfg: &ExperimentConfig,
    rc: &ReconstructionConfig,
    g: &Graph,
    released: Option<&Matrix>,
    seed: u64,
) -> Result<ReconstructionSummary> {
    let (aux, target) = reconstruction_split(g, cfg.aux_fraction, seed)?;
    let ae_cfg = gleak_core::attack::AutoencoderConfig {
        seed: derive_seed(seed, "reconstruction/autoencoder"),
        ..rc.autoencoder.clone()
    };
    let (ae, z) = match rc.source {
        EmbeddingSource::Gae => {
            let ae = train_autoencoder(&aux, &ae_cfg)?;
            let z = ae.encode(&target)?.into_vectors();
            (ae, z)
        }
        source => {
            let z = released.cloned().ok_or_else(|| {
                anyhow!(
                    "no released {} embeddings for the target graph",
                    source.name()
                )
            })?;
            let aux_z = released_embeddings(
                cfg,
                source,
                &aux,
                derive_seed(seed, "reconstruction/adversary"),
            )?;
            (train_decoder(&aux_z, &aux, &ae_cfg)?, z)
        }
    };
    let result = reconstruct_target(
        &ae,
        &z,
        rc.threshold,
        Some(&target),
        derive_seed(seed, "reconstruction/eval"),
    )?;
    let links = result.link_inference(&target, derive_seed(seed, "reconstruction/links"))?;
    Ok(ReconstructionSummary {
        source: rc.source.name().into(),
        decoder: rc.autoencoder.decoder.name().into(),
        aux_fraction: cfg.aux_fraction,
        decoder_parameters: ae.decoder_parameter_count(),
        target_nodes: target.node_count(),
        target_edges: target.edge_count(),
        threshold: result.threshold,
        predicted_edges: result.edges().len(),
        auc: result
            .auc
            .ok_or_else(|| anyhow!("target graph has no edges to evaluate"))?,
        average_precision: result.average_precision.unwrap_or(f64::NAN),
        aux_training_auc: ae.history().last().map_or(f64::NAN, |h| h.auc),
        link_inference: links.metrics,
    })
}

pub fn run_attribute(
    cfg: &ExperimentConfig,
    ac: &AttributeConfig,
    g: &Graph,
    released: &Matrix,
    seed: u64,
) -> Result<AttributeSummary> {
    let attrs = g
        .attributes()
        .ok_or_else(|| anyhow!("attribute inference needs node attributes"))?
        .to_vec();
    let ds = AttributeDataset::split(
        released.clone(),
        attrs,
        cfg.aux_fraction,
        derive_seed(seed, "attribute/split"),
    )?;
    let clf = ClassifierConfig {
        seed: derive_seed(seed, "attribute/classifier"),
        ..ac.classifier.clone()
    };
    let model = train_attribute_attack(&ds, &clf)?;
    let (tx, ty) = ds.target_rows();
    let inference = infer_attributes(&model, &tx, Some(&ty))?;
    let null_f1 = if ac.null_shuffles > 0 {
        let v = permutation_null_f1(
            &ds,
            &clf,
            ac.null_shuffles,
            derive_seed(seed, "attribute/null"),
        )?;
        Some(v.iter().sum::<f64>() / v.len() as f64)
    } else {
        None
    };
    let categories = model.classifier().class_count();
    Ok(AttributeSummary {
        source: ac.source.name().into(),
        aux_fraction: cfg.aux_fraction,
        categories,
        f1_macro: inference.f1_macro.unwrap_or(f64::NAN),
        accuracy: inference.accuracy.unwrap_or(f64::NAN),
        majority_f1: majority_f1(&ty, categories)?,
        null_f1,
    })
}

fn target_summary(model: &NodeClassifier, g: &Graph) -> Result<TargetSummary> {
    let (train_accuracy, test_accuracy) = model.generalization(g)?;
    Ok(TargetSummary {
        arch: model.config().arch.name().into(),
        num_layers: model.config().num_layers,
        train_accuracy,
        test_accuracy: test_accuracy.ok_or_else(|| anyhow!("target graph has no test nodes"))?,
    })
}

/// Runs the selected, configured attacks against one seed's artifacts.
pub fn run_attacks(
    cfg: &ExperimentConfig,
    arts: &TargetArtifacts,
    select: AttackSelection,
) -> SeedReport {
    let start = Instant::now();
    let seed = arts.seed;
    let g = &arts.graph;
    let mut report = SeedReport::new(seed);
    report.dataset = dataset_name(cfg);
    report.nodes = g.node_count();
    report.edges = g.edge_count();
    report.errors = arts.errors.clone();
    let errors = &mut report.errors;

    if let (true, Some(mc), Some(model)) =
        (select.membership, &cfg.attacks.membership, &arts.target)
    {
        report.target = record(errors, "target", target_summary(model, g));
        if let Some(results) = record(
            errors,
            "membership",
            run_membership(cfg, mc, g, model, seed),
        ) {
            for (mode, r) in results {
                if let Some(res) = record(errors, &format!("membership/{}", mode.name()), r) {
                    report.membership.push(res);
                }
            }
        }
    }
    if let (true, Some(rc)) = (select.reconstruction, &cfg.attacks.reconstruction) {
        let released = arts.reconstruction_embeddings.as_ref();
        if rc.source == EmbeddingSource::Gae || released.is_some() {
            report.reconstruction = record(
                errors,
                "reconstruction",
                run_reconstruction(cfg, rc, g, released, seed),
            );
        }
    }
    if let (true, Some(ac), Some(emb)) = (
        select.attribute,
        &cfg.attacks.attribute,
        &arts.attribute_embeddings,
    ) {
        report.attribute = record(errors, "attribute", run_attribute(cfg, ac, g, emb, seed));
    }
    report.timings.seconds = start.elapsed().as_secs_f64();
    report
}

/// Both halves for one seed, as `gleak run` does it.
pub fn run_seed(cfg: &ExperimentConfig, base: Option<&Graph>, seed: u64) -> SeedReport {
    let start = Instant::now();
    let mut report = match TargetArtifacts::build(cfg, base, seed) {
        Ok(arts) => run_attacks(cfg, &arts, AttackSelection::ALL),
        Err(e) => {
            let mut r = SeedReport::new(seed);
            r.dataset = dataset_name(cfg);
            r.errors.push(StageError {
                stage: "dataset".into(),
                message: format!("{e:#}"),
            });
            r
        }
    };
    report.timings.seconds = start.elapsed().as_secs_f64();
    report
}
