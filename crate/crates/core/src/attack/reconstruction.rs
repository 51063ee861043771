//! Graph reconstruction from node embeddings and the link inference built
//! on top of it.
//!
//! The adversary trains a graph autoencoder (two GCN layers feeding an
//! inner-product or bilinear decoder) on its auxiliary graph, then decodes
//! the target's released embeddings into an edge-score matrix.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, AdjacencyNorm, Graph};
use crate::metrics::{average_precision, roc_auc, MetricBundle};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::{sigmoid, Matrix, Optimizer, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderMode {
    InnerProduct,
    Bilinear,
}

impl DecoderMode {
    pub fn name(self) -> &'static str {
        match self {
            DecoderMode::InnerProduct => "inner_product",
            DecoderMode::Bilinear => "bilinear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconstructionLoss {
    /// Binary cross-entropy with edges weighted by `#non-edges / #edges`.
    WeightedBce,
    /// Mean of `(A - σ(scores))²` over off-diagonal entries.
    SquaredError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AutoencoderConfig {
    pub hidden: usize,
    pub embedding_dim: usize,
    pub decoder: DecoderMode,
    pub loss: ReconstructionLoss,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            embedding_dim: 16,
            decoder: DecoderMode::InnerProduct,
            loss: ReconstructionLoss::WeightedBce,
            epochs: 200,
            learning_rate: 0.01,
            seed: 0,
        }
    }
}

/// Training-set AUC/AP of one epoch; epoch 0 is the untrained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderEpoch {
    pub epoch: usize,
    pub loss: Option<f64>,
    pub auc: f64,
    pub average_precision: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphAutoencoder {
    config: AutoencoderConfig,
    /// GCN encoder weights; absent for a decoder fitted on given embeddings.
    encoder: Option<(Matrix, Matrix)>,
    bilinear: Option<Matrix>,
    history: Vec<AutoencoderEpoch>,
}

fn encoder_on_tape(tape: &mut Tape, adj: Var, x: Var, w0: Var, w1: Var) -> Result<Var> {
    let h = tape.matmul(x, w0)?;
    let h = tape.matmul(adj, h)?;
    let h = tape.relu(h)?;
    let z = tape.matmul(h, w1)?;
    tape.matmul(adj, z)
}

fn symmetrize(m: &mut Matrix) {
    let n = m.rows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `σ(z_i · z_j)` for `i < j`, mirrored; the diagonal is 0.
pub fn decode_inner_product(z: &Matrix) -> Matrix {
    scores_from(z, z)
}

/// Sigmoid scores of `left_i · z_j`, computed on the upper triangle and
/// mirrored so the result is exactly symmetric.
fn scores_from(left: &Matrix, z: &Matrix) -> Matrix {
    let n = z.rows();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = sigmoid(crate::tensor::dot(left.row(i), z.row(j)));
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// All edges plus as many distinct non-edges sampled uniformly (or every
/// non-edge if there are fewer). Returned pairs have `i < j`.
pub fn evaluation_pairs(g: &Graph, seed: u64) -> (Vec<(usize, usize)>, Vec<bool>) {
    let n = g.node_count();
    let mut pairs: Vec<(usize, usize)> = g.edges().to_vec();
    let n_pos = pairs.len();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let n_neg_available = total_pairs - n_pos;
    let want = n_pos.min(n_neg_available);
    if want > 0 && want * 2 >= n_neg_available {
        let neg: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.has_edge(i, j))
            .collect();
        let mut rng = rng_from_seed(derive_seed(seed, "reconstruction/pairs"));
        let chosen = rand::seq::index::sample(&mut rng, neg.len(), want);
        let mut picked: Vec<(usize, usize)> = chosen.into_iter().map(|k| neg[k]).collect();
        picked.sort_unstable();
        pairs.extend(picked);
    } else {
        let mut rng = rng_from_seed(derive_seed(seed, "reconstruction/pairs"));
        let mut seen = HashSet::new();
        let mut picked = Vec::with_capacity(want);
        while picked.len() < want {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            let (a, b) = (i.min(j), i.max(j));
            if a != b && !g.has_edge(a, b) && seen.insert((a, b)) {
                picked.push((a, b));
            }
        }
        pairs.extend(picked);
    }
    let labels = (0..pairs.len()).map(|k| k < n_pos).collect();
    (pairs, labels)
}

fn pair_metrics(scores: &Matrix, pairs: &[(usize, usize)], labels: &[bool]) -> Result<(f64, f64)> {
    let s: Vec<f64> = pairs.iter().map(|&(i, j)| scores[(i, j)]).collect();
    Ok((roc_auc(&s, labels)?, average_precision(&s, labels)?))
}

impl GraphAutoencoder {
    pub fn config(&self) -> &AutoencoderConfig {
        &self.config
    }

    pub fn history(&self) -> &[AutoencoderEpoch] {
        &self.history
    }

    pub fn bilinear_weight(&self) -> Option<&Matrix> {
        self.bilinear.as_ref()
    }

    pub fn decoder_parameter_count(&self) -> usize {
        self.bilinear.as_ref().map_or(0, |m| m.data().len())
    }

    pub fn has_encoder(&self) -> bool {
        self.encoder.is_some()
    }

    /// Encoder output for every node of `g`.
    pub fn encode(&self, g: &Graph) -> Result<EmbeddingMatrix> {
        let (w0, w1) = self
            .encoder
            .as_ref()
            .ok_or_else(|| Error::invalid("this model is a decoder without an encoder"))?;
        let adj = normalize_adjacency(g, AdjacencyNorm::Sym).matrix;
        let h = adj.matmul(&g.features().matmul(w0)?)?.relu();
        EmbeddingMatrix::dense(adj.matmul(&h.matmul(w1)?)?)
    }

    /// Edge-score matrix `S` for embedding rows `z`; symmetric with zero
    /// diagonal.
    pub fn decode_adjacency(&self, z: &Matrix) -> Result<Matrix> {
        match &self.bilinear {
            None => Ok(decode_inner_product(z)),
            Some(w) => {
                if z.cols() != w.rows() {
                    return Err(Error::DimensionMismatch {
                        op: "bilinear decoder",
                        left: w.shape(),
                        right: z.shape(),
                    });
                }
                Ok(scores_from(&z.matmul(w)?, z))
            }
        }
    }
}

/// Per-entry loss weights for `aux`'s adjacency: zero on the diagonal and,
/// for weighted BCE, `#non-edges / #edges` on edges.
fn loss_weights(aux: &Graph, loss: ReconstructionLoss) -> Result<Matrix> {
    let n = aux.node_count();
    let edges = aux.edge_count();
    if edges == 0 {
        return Err(Error::Degenerate("auxiliary graph has no edges".into()));
    }
    let pos_weight = (n * (n - 1) / 2 - edges) as f64 / edges as f64;
    let mut weights = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                weights[(i, j)] = match loss {
                    ReconstructionLoss::WeightedBce if aux.has_edge(i, j) => pos_weight,
                    _ => 1.0,
                };
            }
        }
    }
    Ok(weights)
}

fn reconstruction_loss(
    tape: &mut Tape,
    logits: Var,
    target: &Matrix,
    weights: &Matrix,
    loss: ReconstructionLoss,
) -> Result<Var> {
    match loss {
        ReconstructionLoss::WeightedBce => tape.bce_with_logits(logits, target, weights),
        ReconstructionLoss::SquaredError => {
            let n = target.rows();
            let s = tape.sigmoid(logits)?;
            let t = tape.constant(target.clone());
            let diff = tape.sub(s, t)?;
            let mask = tape.constant(weights.clone());
            let masked = tape.mul(diff, mask)?;
            let sq = tape.mul(masked, masked)?;
            let total = tape.sum(sq)?;
            tape.scale(total, 1.0 / (n * (n.max(2) - 1)) as f64)
        }
    }
}

/// Decoder logits `Z·Zᵀ` or `Z·W_b·Zᵀ`.
fn logits_on_tape(tape: &mut Tape, z: Var, bilinear: Option<Var>) -> Result<Var> {
    let zt = tape.transpose(z)?;
    let left = match bilinear {
        Some(w) => tape.matmul(z, w)?,
        None => z,
    };
    tape.matmul(left, zt)
}

fn check_config(cfg: &AutoencoderConfig) -> Result<()> {
    if cfg.learning_rate.is_nan()
        || cfg.learning_rate <= 0.0
        || cfg.hidden == 0
        || cfg.embedding_dim == 0
    {
        return Err(Error::invalid(
            "autoencoder needs positive widths and learning rate",
        ));
    }
    Ok(())
}

/// Trains the autoencoder to reconstruct `aux`'s adjacency from its features.
pub fn train_autoencoder(aux: &Graph, cfg: &AutoencoderConfig) -> Result<GraphAutoencoder> {
    let weights = loss_weights(aux, cfg.loss)?;
    check_config(cfg)?;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, "autoencoder/init"));
    let mut params = vec![
        Matrix::glorot(aux.feature_dim(), cfg.hidden, &mut rng),
        Matrix::glorot(cfg.hidden, cfg.embedding_dim, &mut rng),
    ];
    if cfg.decoder == DecoderMode::Bilinear {
        params.push(Matrix::identity(cfg.embedding_dim));
    }

    let adj = normalize_adjacency(aux, AdjacencyNorm::Sym).matrix;
    let target = aux.adjacency();
    let (pairs, labels) = evaluation_pairs(aux, derive_seed(cfg.seed, "autoencoder/monitor"));

    let mut model = GraphAutoencoder {
        config: cfg.clone(),
        encoder: Some((params[0].clone(), params[1].clone())),
        bilinear: params.get(2).cloned(),
        history: Vec::new(),
    };
    let monitor =
        |m: &GraphAutoencoder, epoch: usize, loss: Option<f64>| -> Result<AutoencoderEpoch> {
            let z = m.encode(aux)?;
            let s = m.decode_adjacency(z.vectors())?;
            let (auc, ap) = pair_metrics(&s, &pairs, &labels)?;
            Ok(AutoencoderEpoch {
                epoch,
                loss,
                auc,
                average_precision: ap,
            })
        };
    model.history.push(monitor(&model, 0, None)?);

    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    for epoch in 1..=cfg.epochs {
        let mut tape = Tape::new();
        let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
        let a = tape.constant(adj.clone());
        let x = tape.constant(aux.features().clone());
        let z = encoder_on_tape(&mut tape, a, x, vars[0], vars[1])?;
        let logits = logits_on_tape(&mut tape, z, vars.get(2).copied())?;
        let loss = reconstruction_loss(&mut tape, logits, &target, &weights, cfg.loss)?;
        let loss_value = tape.value(loss)?.item();
        let grads = tape.backward(loss)?.get_all(&vars)?;
        opt.step(&mut params, &grads)?;
        if let Some(w) = params.get_mut(2) {
            symmetrize(w);
        }
        model.encoder = Some((params[0].clone(), params[1].clone()));
        model.bilinear = params.get(2).cloned();
        model
            .history
            .push(monitor(&model, epoch, Some(loss_value))?);
    }
    Ok(model)
}

/// Fits only the decoder, on embeddings the adversary computed for its own
/// auxiliary graph with the same pipeline that produced the target's.
///
/// The inner-product decoder has no parameters, so in that mode only the
/// epoch-0 history entry is recorded. The bilinear weight starts at the
/// identity, i.e. at the inner-product decoder. `hidden` and
/// `embedding_dim` are ignored; the weight takes the width of `aux_z`.
pub fn train_decoder(
    aux_z: &Matrix,
    aux: &Graph,
    cfg: &AutoencoderConfig,
) -> Result<GraphAutoencoder> {
    if aux_z.rows() != aux.node_count() {
        return Err(Error::invalid(format!(
            "{} embedding rows for a {}-node auxiliary graph",
            aux_z.rows(),
            aux.node_count()
        )));
    }
    let weights = loss_weights(aux, cfg.loss)?;
    if cfg.learning_rate.is_nan() || cfg.learning_rate <= 0.0 {
        return Err(Error::invalid("decoder needs a positive learning rate"));
    }
    let target = aux.adjacency();
    let (pairs, labels) = evaluation_pairs(aux, derive_seed(cfg.seed, "autoencoder/monitor"));
    let mut model = GraphAutoencoder {
        config: cfg.clone(),
        encoder: None,
        bilinear: (cfg.decoder == DecoderMode::Bilinear).then(|| Matrix::identity(aux_z.cols())),
        history: Vec::new(),
    };
    let monitor =
        |m: &GraphAutoencoder, epoch: usize, loss: Option<f64>| -> Result<AutoencoderEpoch> {
            let (auc, ap) = pair_metrics(&m.decode_adjacency(aux_z)?, &pairs, &labels)?;
            Ok(AutoencoderEpoch {
                epoch,
                loss,
                auc,
                average_precision: ap,
            })
        };
    model.history.push(monitor(&model, 0, None)?);
    let Some(w0) = model.bilinear.clone() else {
        return Ok(model);
    };
    let mut params = vec![w0];
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    for epoch in 1..=cfg.epochs {
        let mut tape = Tape::new();
        let w = tape.param(params[0].clone());
        let z = tape.constant(aux_z.clone());
        let logits = logits_on_tape(&mut tape, z, Some(w))?;
        let loss = reconstruction_loss(&mut tape, logits, &target, &weights, cfg.loss)?;
        let loss_value = tape.value(loss)?.item();
        let grads = tape.backward(loss)?.get_all(&[w])?;
        opt.step(&mut params, &grads)?;
        symmetrize(&mut params[0]);
        model.bilinear = Some(params[0].clone());
        model
            .history
            .push(monitor(&model, epoch, Some(loss_value))?);
    }
    Ok(model)
}

/// How the score matrix is binarized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "value")]
pub enum ThresholdPolicy {
    /// Edge when `S ≥ τ`.
    Fixed(f64),
    /// Pick τ so that roughly this fraction of node pairs become edges.
    MatchDensity(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::Fixed(0.5)
    }
}

/// Scores, binarization and (when ground truth is known) evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub scores: Matrix,
    pub threshold: f64,
    pub decoder: DecoderMode,
    /// AUC/AP on all true edges plus as many sampled non-edges.
    pub auc: Option<f64>,
    pub average_precision: Option<f64>,
}

impl ReconstructionResult {
    /// Builds a result directly from a score matrix.
    pub fn from_scores(scores: Matrix, threshold: f64, decoder: DecoderMode) -> Result<Self> {
        if scores.rows() != scores.cols() {
            return Err(Error::invalid("score matrix must be square"));
        }
        Ok(Self {
            scores,
            threshold,
            decoder,
            auc: None,
            average_precision: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.scores.rows()
    }

    /// `A_rec[i][j]`.
    pub fn infer_link(&self, i: usize, j: usize) -> Result<bool> {
        let n = self.node_count();
        for v in [i, j] {
            if v >= n {
                return Err(Error::NodeOutOfRange { node: v, n });
            }
        }
        if i == j {
            return Err(Error::invalid("link query needs two distinct nodes"));
        }
        Ok(self.scores[(i, j)] >= self.threshold)
    }

    /// Reconstructed edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.node_count();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.scores[(i, j)] >= self.threshold)
            .collect()
    }

    /// Link-inference accuracy on a balanced edge/non-edge query set.
    pub fn link_inference(&self, truth: &Graph, seed: u64) -> Result<LinkInference> {
        if truth.node_count() != self.node_count() {
            return Err(Error::invalid(
                "ground-truth graph size differs from the score matrix",
            ));
        }
        let (pairs, labels) = evaluation_pairs(truth, derive_seed(seed, "link/queries"));
        let decisions = pairs
            .iter()
            .map(|&(i, j)| self.infer_link(i, j))
            .collect::<Result<Vec<_>>>()?;
        let s: Vec<f64> = pairs.iter().map(|&(i, j)| self.scores[(i, j)]).collect();
        Ok(LinkInference {
            queries: pairs.len(),
            metrics: MetricBundle::binary(&s, &decisions, &labels)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkInference {
    pub queries: usize,
    pub metrics: MetricBundle,
}

fn density_threshold(scores: &Matrix, density: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::invalid(format!("density {density} outside [0,1]")));
    }
    let n = scores.rows();
    let mut upper: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| scores[(i, j)])
        .collect();
    if upper.is_empty() {
        return Ok(0.5);
    }
    upper.sort_by(|a, b| b.total_cmp(a));
    let k = (density * upper.len() as f64).round() as usize;
    Ok(if k == 0 { f64::INFINITY } else { upper[k - 1] })
}

/// Decodes the target embeddings and, if `truth` is given, scores the
/// reconstruction against it.
pub fn reconstruct_target(
    ae: &GraphAutoencoder,
    z: &Matrix,
    policy: ThresholdPolicy,
    truth: Option<&Graph>,
    seed: u64,
) -> Result<ReconstructionResult> {
    let scores = ae.decode_adjacency(z)?;
    let threshold = match policy {
        ThresholdPolicy::Fixed(t) => t,
        ThresholdPolicy::MatchDensity(d) => density_threshold(&scores, d)?,
    };
    let mut result = ReconstructionResult::from_scores(scores, threshold, ae.config.decoder)?;
    if let Some(g) = truth {
        if g.node_count() != z.rows() {
            return Err(Error::invalid(format!(
                "{} embedding rows for a {}-node ground-truth graph",
                z.rows(),
                g.node_count()
            )));
        }
        if g.edge_count() > 0 {
            let (pairs, labels) = evaluation_pairs(g, derive_seed(seed, "reconstruction/eval"));
            let (auc, ap) = pair_metrics(&result.scores, &pairs, &labels)?;
            result.auc = Some(auc);
            result.average_precision = Some(ap);
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate_sbm, SbmConfig};

    fn sbm(seed: u64) -> Graph {
        let cfg = SbmConfig {
            block_sizes: vec![40, 40],
            p_intra: 0.2,
            p_inter: 0.01,
            ..SbmConfig::default()
        };
        generate_sbm(&cfg, seed).unwrap()
    }

    #[test]
    fn zero_embeddings_score_one_half() {
        let s = decode_inner_product(&Matrix::zeros(4, 3));
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(s[(i, j)], if i == j { 0.0 } else { 0.5 });
            }
        }
    }

    #[test]
    fn sigmoid_oracle_cases() {
        let z = Matrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 7.0]]).unwrap();
        assert_eq!(decode_inner_product(&z)[(0, 1)], 0.5);
        let r = (3.0f64.ln() / 2.0).sqrt();
        let z = Matrix::from_rows(&[vec![r, r], vec![r, r]]).unwrap();
        assert!((decode_inner_product(&z)[(0, 1)] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn block_indicators_score_intra_higher() {
        let z = Matrix::from_rows(&[
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let s = decode_inner_product(&z);
        assert!(s[(0, 1)] > s[(0, 2)]);
        assert!(s[(2, 3)] > s[(1, 3)]);
    }

    #[test]
    fn evaluation_pairs_are_balanced() {
        let g = sbm(1);
        let (pairs, labels) = evaluation_pairs(&g, 1);
        assert_eq!(labels.iter().filter(|&&l| l).count(), g.edge_count());
        assert_eq!(pairs.len(), 2 * g.edge_count());
        for (&(i, j), &l) in pairs.iter().zip(&labels) {
            assert!(i < j);
            assert_eq!(g.has_edge(i, j), l);
        }
        let unique: HashSet<_> = pairs.iter().collect();
        assert_eq!(unique.len(), pairs.len());
    }

    #[test]
    fn oracle_adjacency_links_perfectly() {
        let g = sbm(2);
        let r = ReconstructionResult::from_scores(g.adjacency(), 0.5, DecoderMode::InnerProduct)
            .unwrap();
        let li = r.link_inference(&g, 2).unwrap();
        assert_eq!(li.metrics.accuracy, Some(1.0));
        assert_eq!(li.metrics.advantage, Some(1.0));
        assert!(r.infer_link(0, 0).is_err());
        assert!(r.infer_link(0, 80).is_err());
    }

    #[test]
    fn autoencoder_learns_aux_structure() {
        let g = sbm(3);
        let cfg = AutoencoderConfig {
            epochs: 100,
            seed: 3,
            ..AutoencoderConfig::default()
        };
        let ae = train_autoencoder(&g, &cfg).unwrap();
        assert_eq!(ae.decoder_parameter_count(), 0);
        let h = ae.history();
        assert_eq!(h.len(), 101);
        assert!(h.last().unwrap().auc > 0.9, "{:?}", h.last());
    }

    #[test]
    fn bilinear_weight_stays_symmetric() {
        let g = sbm(4);
        let cfg = AutoencoderConfig {
            decoder: DecoderMode::Bilinear,
            epochs: 20,
            seed: 4,
            ..AutoencoderConfig::default()
        };
        let ae = train_autoencoder(&g, &cfg).unwrap();
        let w = ae.bilinear_weight().unwrap();
        assert_eq!(w, &w.transpose());
        let z = ae.encode(&g).unwrap();
        let s = ae.decode_adjacency(z.vectors()).unwrap();
        assert_eq!(s, s.transpose());
        assert!(ae.decode_adjacency(&Matrix::zeros(3, 5)).is_err());
    }

    #[test]
    fn edgeless_aux_rejected() {
        let g = Graph::new(Vec::new(), Matrix::zeros(5, 2), None, None).unwrap();
        assert!(train_autoencoder(&g, &AutoencoderConfig::default()).is_err());
    }

    #[test]
    fn density_policy_selects_requested_fraction() {
        let g = sbm(5);
        let cfg = AutoencoderConfig {
            epochs: 30,
            seed: 5,
            ..AutoencoderConfig::default()
        };
        let ae = train_autoencoder(&g, &cfg).unwrap();
        let z = ae.encode(&g).unwrap();
        let pairs = 80 * 79 / 2;
        let r = reconstruct_target(
            &ae,
            z.vectors(),
            ThresholdPolicy::MatchDensity(0.1),
            Some(&g),
            5,
        )
        .unwrap();
        let got = r.edges().len();
        assert!((got as i64 - pairs as i64 / 10).abs() <= 2, "{got}");
        assert!(r.auc.is_some());
    }

    /// Edges only across two 20-node halves; embeddings are half indicators,
    /// so the inner product ranks non-edges above edges.
    fn bipartite() -> (Graph, Matrix) {
        let mut rng = rng_from_seed(8);
        let mut edges = Vec::new();
        for i in 0..20 {
            for j in 20..40 {
                if rng.random::<f64>() < 0.3 {
                    edges.push((i, j));
                }
            }
        }
        let z = Matrix::from_rows(
            &(0..40)
                .map(|i| {
                    if i < 20 {
                        vec![1.0, 0.0]
                    } else {
                        vec![0.0, 1.0]
                    }
                })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        (
            Graph::new(edges, Matrix::zeros(40, 1), None, None).unwrap(),
            z,
        )
    }

    #[test]
    fn inner_product_decoder_has_nothing_to_fit() {
        let (g, z) = bipartite();
        let d = train_decoder(&z, &g, &AutoencoderConfig::default()).unwrap();
        assert_eq!(d.decoder_parameter_count(), 0);
        assert_eq!(d.history().len(), 1);
        assert!(!d.has_encoder());
        assert!(d.encode(&g).is_err());
        assert!(d.history()[0].auc < 0.5);
    }

    #[test]
    fn bilinear_decoder_learns_cross_block_links() {
        let (g, z) = bipartite();
        let cfg = AutoencoderConfig {
            decoder: DecoderMode::Bilinear,
            epochs: 100,
            learning_rate: 0.05,
            ..AutoencoderConfig::default()
        };
        let d = train_decoder(&z, &g, &cfg).unwrap();
        let w = d.bilinear_weight().unwrap();
        assert_eq!(w, &w.transpose());
        assert_eq!(d.decoder_parameter_count(), 4);
        // Cross-half non-edges tie with the edges, so ranking every
        // cross-half pair first is the best any decoder can do here.
        let s = d.decode_adjacency(&z).unwrap();
        assert!(s[(0, 20)] > s[(0, 1)] && s[(0, 20)] > s[(20, 21)]);
        assert!(d.history().last().unwrap().auc > d.history()[0].auc);
    }

    #[test]
    fn decoder_rows_must_match_graph() {
        let (g, _) = bipartite();
        assert!(train_decoder(&Matrix::zeros(3, 2), &g, &AutoencoderConfig::default()).is_err());
    }
}
