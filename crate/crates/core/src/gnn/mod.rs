//! GCN and GraphSAGE node classifiers.
//!
//! Layers carry no bias. A GCN layer computes `Â · H · W` with the
//! symmetrically normalized adjacency `Â`; a GraphSAGE layer computes
//! `[H ‖ M · H] · W` where `M` averages over neighbors. Every layer except the
//! last is followed by ReLU; the last layer's output are the class logits.
//!
//! Training is inductive: only the subgraph induced by the training mask is
//! ever seen by the optimizer.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{neighbor_mean_operator, normalize_adjacency, AdjacencyNorm, Graph};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::{Matrix, Optimizer, OptimizerKind, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gcn,
    Sage,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Sage => "sage",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnnConfig {
    pub arch: Arch,
    /// Number of graph layers, including the output layer.
    pub num_layers: usize,
    /// Width of every hidden layer; `None` picks 16 for GCN and 64 for GraphSAGE.
    pub hidden_dim: Option<usize>,
    /// Which layer's activations are released as the node embedding.
    pub embedding_layer: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self {
            arch: Arch::Gcn,
            num_layers: 2,
            hidden_dim: None,
            embedding_layer: 1,
            dropout: 0.0,
            epochs: 200,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

impl GnnConfig {
    pub fn hidden_width(&self) -> usize {
        self.hidden_dim.unwrap_or(match self.arch {
            Arch::Gcn => 16,
            Arch::Sage => 64,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers < 2 {
            return Err(Error::invalid("num_layers must be at least 2"));
        }
        if self.embedding_layer < 1 || self.embedding_layer >= self.num_layers {
            return Err(Error::invalid(format!(
                "embedding_layer must be in [1, {}), got {}",
                self.num_layers, self.embedding_layer
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid("dropout must be in [0, 1)"));
        }
        if self.hidden_width() == 0 {
            return Err(Error::invalid("hidden_dim must be positive"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }

    /// `(rows, cols)` of every layer's weight matrix.
    pub fn weight_shapes(&self, in_dim: usize, classes: usize) -> Vec<(usize, usize)> {
        let h = self.hidden_width();
        let factor = match self.arch {
            Arch::Gcn => 1,
            Arch::Sage => 2,
        };
        (0..self.num_layers)
            .map(|l| {
                let fan_in = if l == 0 { in_dim } else { h };
                let fan_out = if l + 1 == self.num_layers { classes } else { h };
                (fan_in * factor, fan_out)
            })
            .collect()
    }
}

/// Per-epoch training record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
}

/// Activations of every layer; `layers[0]` is the input and the last entry
/// holds the logits.
#[derive(Clone, Debug)]
pub struct Forward {
    pub layers: Vec<Matrix>,
}

impl Forward {
    pub fn logits(&self) -> &Matrix {
        self.layers
            .last()
            .expect("forward has at least the input layer")
    }
}

/// The propagation operator a given architecture multiplies with.
pub fn propagation_operator(arch: Arch, g: &Graph) -> Matrix {
    match arch {
        Arch::Gcn => normalize_adjacency(g, AdjacencyNorm::Sym).matrix,
        Arch::Sage => neighbor_mean_operator(g),
    }
}

/// GCN forward pass: `H_{l+1} = relu(Â H_l W_l)`, no ReLU on the last layer.
pub fn gcn_forward(weights: &[Matrix], norm_adj: &Matrix, x: &Matrix) -> Result<Forward> {
    if norm_adj.rows() != x.rows() || norm_adj.cols() != x.rows() {
        return Err(Error::DimensionMismatch {
            op: "gcn_forward",
            left: norm_adj.shape(),
            right: x.shape(),
        });
    }
    let mut layers = vec![x.clone()];
    for (l, w) in weights.iter().enumerate() {
        let h = norm_adj.matmul(&layers[l].matmul(w)?)?;
        layers.push(if l + 1 < weights.len() { h.relu() } else { h });
    }
    Ok(Forward { layers })
}

/// GraphSAGE forward pass with mean aggregation:
/// `H_{l+1} = relu([H_l ‖ M H_l] W_l)`, no ReLU on the last layer.
pub fn sage_forward(weights: &[Matrix], mean_op: &Matrix, x: &Matrix) -> Result<Forward> {
    if mean_op.rows() != x.rows() || mean_op.cols() != x.rows() {
        return Err(Error::DimensionMismatch {
            op: "sage_forward",
            left: mean_op.shape(),
            right: x.shape(),
        });
    }
    let mut layers = vec![x.clone()];
    for (l, w) in weights.iter().enumerate() {
        let h = &layers[l];
        let z = h.concat_cols(&mean_op.matmul(h)?)?.matmul(w)?;
        layers.push(if l + 1 < weights.len() { z.relu() } else { z });
    }
    Ok(Forward { layers })
}

/// Records the forward pass on a tape; returns the logits. Dropout, if any,
/// is applied to hidden activations.
fn taped_forward(
    tape: &mut Tape,
    arch: Arch,
    weights: &[Var],
    op: Var,
    x: Var,
    dropout: Option<(f64, &mut crate::rng::Rng)>,
) -> Result<Var> {
    let mut h = x;
    let mut dropout = dropout;
    for (l, &w) in weights.iter().enumerate() {
        let z = match arch {
            Arch::Gcn => {
                let hw = tape.matmul(h, w)?;
                tape.matmul(op, hw)?
            }
            Arch::Sage => {
                let agg = tape.matmul(op, h)?;
                let cat = tape.concat_cols(h, agg)?;
                tape.matmul(cat, w)?
            }
        };
        if l + 1 == weights.len() {
            return Ok(z);
        }
        h = tape.relu(z)?;
        if let Some((p, rng)) = dropout.as_mut() {
            if *p > 0.0 {
                let (r, c) = tape.value(h)?.shape();
                let keep = 1.0 - *p;
                let data = (0..r * c)
                    .map(|_| {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let mask = tape.constant(Matrix::from_vec(r, c, data)?);
                h = tape.mul(h, mask)?;
            }
        }
    }
    Err(Error::invalid("model has no layers"))
}

/// A trained (or freshly initialized) node classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeClassifier {
    config: GnnConfig,
    in_dim: usize,
    classes: usize,
    weights: Vec<Matrix>,
    history: Vec<EpochStats>,
}

impl NodeClassifier {
    /// Glorot-initialized model.
    pub fn init(config: &GnnConfig, in_dim: usize, classes: usize) -> Result<Self> {
        config.validate()?;
        if classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        let mut rng = rng_from_seed(derive_seed(config.seed, "gnn/init"));
        let weights = config
            .weight_shapes(in_dim, classes)
            .into_iter()
            .map(|(r, c)| Matrix::glorot(r, c, &mut rng))
            .collect();
        Ok(Self {
            config: config.clone(),
            in_dim,
            classes,
            weights,
            history: Vec::new(),
        })
    }

    /// Model with explicit weights, e.g. loaded from a checkpoint.
    pub fn from_weights(
        config: &GnnConfig,
        weights: Vec<Matrix>,
        history: Vec<EpochStats>,
    ) -> Result<Self> {
        config.validate()?;
        let (first, last) = match (weights.first(), weights.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(Error::invalid("no weights")),
        };
        let factor = if config.arch == Arch::Sage { 2 } else { 1 };
        let in_dim = first.rows() / factor;
        let classes = last.cols();
        let expected = config.weight_shapes(in_dim, classes);
        let actual: Vec<_> = weights.iter().map(Matrix::shape).collect();
        if expected != actual {
            return Err(Error::invalid(format!(
                "weight shapes {actual:?} do not match config (expected {expected:?})"
            )));
        }
        Ok(Self {
            config: config.clone(),
            in_dim,
            classes,
            weights,
            history,
        })
    }

    pub fn config(&self) -> &GnnConfig {
        &self.config
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn history(&self) -> &[EpochStats] {
        &self.history
    }

    pub fn class_count(&self) -> usize {
        self.classes
    }

    pub fn input_dim(&self) -> usize {
        self.in_dim
    }

    /// Full forward pass over `g`.
    pub fn forward(&self, g: &Graph) -> Result<Forward> {
        if g.feature_dim() != self.in_dim {
            return Err(Error::DimensionMismatch {
                op: "forward",
                left: (g.node_count(), self.in_dim),
                right: g.features().shape(),
            });
        }
        self.forward_with(&propagation_operator(self.config.arch, g), g.features())
    }

    fn forward_with(&self, op: &Matrix, x: &Matrix) -> Result<Forward> {
        match self.config.arch {
            Arch::Gcn => gcn_forward(&self.weights, op, x),
            Arch::Sage => sage_forward(&self.weights, op, x),
        }
    }

    /// Class probabilities for `nodes`, computed with each node's
    /// neighborhood inside `g`.
    pub fn predict(&self, g: &Graph, nodes: &[usize]) -> Result<Matrix> {
        for &v in nodes {
            g.check_node(v)?;
        }
        let fwd = self.forward(g)?;
        Ok(fwd.logits().select_rows(nodes).softmax_rows())
    }

    /// Activations of `layer` for every node of `g`.
    pub fn extract_embeddings(&self, g: &Graph, layer: usize) -> Result<EmbeddingMatrix> {
        if layer < 1 || layer >= self.config.num_layers {
            return Err(Error::invalid(format!(
                "embedding layer {layer} out of range [1, {})",
                self.config.num_layers
            )));
        }
        let mut fwd = self.forward(g)?;
        EmbeddingMatrix::dense(fwd.layers.swap_remove(layer))
    }

    /// Fraction of `nodes` whose argmax prediction matches their label in `g`.
    pub fn accuracy_on(&self, g: &Graph, nodes: &[usize]) -> Result<f64> {
        self.accuracy_with(&propagation_operator(self.config.arch, g), g, nodes)
    }

    fn accuracy_with(&self, op: &Matrix, g: &Graph, nodes: &[usize]) -> Result<f64> {
        let labels = g
            .labels()
            .ok_or_else(|| Error::invalid("graph has no labels"))?;
        if nodes.is_empty() {
            return Err(Error::EmptyInput("accuracy nodes"));
        }
        let preds = self
            .forward_with(op, g.features())?
            .logits()
            .select_rows(nodes)
            .argmax_rows();
        let hits = preds
            .iter()
            .zip(nodes)
            .filter(|(p, &v)| **p == labels[v])
            .count();
        Ok(hits as f64 / nodes.len() as f64)
    }

    /// Accuracy on the training subgraph and on test nodes of the held-out graph.
    pub fn generalization(&self, g: &Graph) -> Result<(f64, Option<f64>)> {
        let train = g.train_subgraph()?;
        let train_acc = self.accuracy_on(
            &train.graph,
            &(0..train.graph.node_count()).collect::<Vec<_>>(),
        )?;
        let held = g.heldout_subgraph()?;
        let test_nodes = held.graph.masks().test_nodes();
        let test_acc = if test_nodes.is_empty() {
            None
        } else {
            Some(self.accuracy_on(&held.graph, &test_nodes)?)
        };
        Ok((train_acc, test_acc))
    }
}

/// Trains a classifier on the subgraph induced by `g`'s training mask.
///
/// Test accuracy in the history is measured on the held-out graph (the
/// subgraph induced by the test mask) and never influences the weights.
pub fn train(g: &Graph, cfg: &GnnConfig) -> Result<NodeClassifier> {
    cfg.validate()?;
    if g.labels().is_none() {
        return Err(Error::invalid("training graph has no labels"));
    }
    let train_sub = g.train_subgraph()?;
    let tg = &train_sub.graph;
    if tg.node_count() == 0 {
        return Err(Error::EmptyInput("no labeled training nodes"));
    }
    let targets: Vec<usize> = tg.labels().expect("subgraph keeps labels").to_vec();
    let mut model = NodeClassifier::init(cfg, g.feature_dim(), g.class_count())?;

    let held = g.heldout_subgraph()?;
    let test_nodes = held.graph.masks().test_nodes();
    let train_nodes: Vec<usize> = (0..tg.node_count()).collect();

    let op = propagation_operator(cfg.arch, tg);
    let held_op = propagation_operator(cfg.arch, &held.graph);
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate)?;
    let mut dropout_rng = rng_from_seed(derive_seed(cfg.seed, "gnn/dropout"));

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let params: Vec<Var> = model
            .weights
            .iter()
            .map(|w| tape.param(w.clone()))
            .collect();
        let op_v = tape.constant(op.clone());
        let x_v = tape.constant(tg.features().clone());
        let logits = taped_forward(
            &mut tape,
            cfg.arch,
            &params,
            op_v,
            x_v,
            Some((cfg.dropout, &mut dropout_rng)),
        )?;
        let loss = tape.softmax_cross_entropy(logits, &targets)?;
        let loss_value = tape.value(loss)?.item();
        let grads = tape.backward(loss)?.get_all(&params)?;
        opt.step(&mut model.weights, &grads)?;

        let train_accuracy = model.accuracy_with(&op, tg, &train_nodes)?;
        let test_accuracy = if test_nodes.is_empty() {
            None
        } else {
            Some(model.accuracy_with(&held_op, &held.graph, &test_nodes)?)
        };
        model.history.push(EpochStats {
            epoch: epoch + 1,
            loss: loss_value,
            train_accuracy,
            test_accuracy,
        });
    }
    Ok(model)
}

/// Differentiable forward used by gradient checks and custom losses.
pub fn forward_on_tape(
    tape: &mut Tape,
    arch: Arch,
    weights: &[Var],
    op: Var,
    x: Var,
) -> Result<Var> {
    taped_forward(tape, arch, weights, op, x, None)
}
