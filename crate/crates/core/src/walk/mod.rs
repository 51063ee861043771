//! DeepWalk and Node2Vec: biased random walks fed to SkipGram with negative
//! sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng::{derive_seed, derive_seed_indexed, rng_from_seed};
use crate::tensor::{dot, sigmoid, Matrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WalkConfig {
    pub walks_per_node: usize,
    pub walk_length: usize,
    pub window: usize,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Return parameter: weight `1/p` for stepping back to the previous node.
    pub p: f64,
    /// In-out parameter: weight `1/q` for moving two hops away from the previous node.
    pub q: f64,
    /// Row-normalize the released vectors to unit length.
    pub normalize: bool,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walks_per_node: 10,
            walk_length: 80,
            window: 10,
            dim: 128,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            p: 1.0,
            q: 1.0,
            normalize: false,
            seed: 0,
        }
    }
}

impl WalkConfig {
    /// DeepWalk is Node2Vec with `p = q = 1`.
    pub fn deepwalk() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::invalid("p and q must be positive"));
        }
        if self.walk_length < 2 {
            return Err(Error::invalid("walk_length must be at least 2"));
        }
        if self.window < 1 {
            return Err(Error::invalid("window must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// Unnormalized weights over `g.neighbors(cur)` for the next step.
///
/// Without a previous node every neighbor weighs 1. Otherwise a neighbor
/// weighs `1/p` if it is the previous node, 1 if it is adjacent to the
/// previous node and `1/q` if it is two hops away.
pub fn transition_weights(g: &Graph, prev: Option<usize>, cur: usize, p: f64, q: f64) -> Vec<f64> {
    g.neighbors(cur)
        .iter()
        .map(|&x| match prev {
            None => 1.0,
            Some(t) if x == t => 1.0 / p,
            Some(t) if g.has_edge(t, x) => 1.0,
            Some(_) => 1.0 / q,
        })
        .collect()
}

/// Draws the node after `cur`; `None` at a dead end.
pub fn next_step<R: Rng + ?Sized>(
    g: &Graph,
    prev: Option<usize>,
    cur: usize,
    p: f64,
    q: f64,
    rng: &mut R,
) -> Option<usize> {
    let nbrs = g.neighbors(cur);
    if nbrs.is_empty() {
        return None;
    }
    let weights = transition_weights(g, prev, cur, p, q);
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (&x, w) in nbrs.iter().zip(&weights) {
        if r < *w {
            return Some(x);
        }
        r -= w;
    }
    nbrs.last().copied()
}

fn single_walk(g: &Graph, start: usize, walk_idx: usize, cfg: &WalkConfig) -> Vec<usize> {
    let mut rng = rng_from_seed(derive_seed_indexed(
        cfg.seed,
        "walk",
        &[start as u64, walk_idx as u64],
    ));
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    let mut prev = None;
    while walk.len() < cfg.walk_length {
        let cur = *walk.last().expect("walk is non-empty");
        match next_step(g, prev, cur, cfg.p, cfg.q, &mut rng) {
            Some(x) => {
                prev = Some(cur);
                walk.push(x);
            }
            None => break,
        }
    }
    walk
}

/// `walks_per_node` walks from every non-isolated node, ordered by walk
/// round and then start node. Each walk has its own RNG stream so the result
/// does not depend on thread scheduling.
pub fn sample_walks(g: &Graph, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let starts: Vec<usize> = (0..g.node_count()).filter(|&v| g.degree(v) > 0).collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.walks_per_node)
        .flat_map(|w| starts.iter().map(move |&v| (w, v)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(w, v)| single_walk(g, v, w, cfg))
        .collect())
}

/// Trained vectors plus the mean loss per (target, context) pair of each epoch.
#[derive(Clone, Debug)]
pub struct SkipGramOutput {
    pub embedding: EmbeddingMatrix,
    pub epoch_losses: Vec<f64>,
}

/// SkipGram with negative sampling over `n_nodes` tokens.
///
/// Each (target, context) pair within `window` positions contributes
/// `-log σ(u_c·v_t) - Σ_neg log σ(-u_n·v_t)`. Negatives are drawn with
/// probability proportional to `count^0.75`. The learning rate decays
/// linearly to 1e-4 of its start value. Target-side vectors `v` are returned.
pub fn train_skipgram(
    walks: &[Vec<usize>],
    n_nodes: usize,
    cfg: &WalkConfig,
) -> Result<SkipGramOutput> {
    cfg.validate()?;
    if walks.iter().all(|w| w.len() < 2) {
        return Err(Error::EmptyInput("walks"));
    }
    let d = cfg.dim;
    let mut counts = vec![0.0f64; n_nodes];
    for walk in walks {
        for &v in walk {
            if v >= n_nodes {
                return Err(Error::NodeOutOfRange {
                    node: v,
                    n: n_nodes,
                });
            }
            counts[v] += 1.0;
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75)))
        .map_err(|e| Error::Degenerate(format!("negative-sampling table: {e}")))?;

    let mut rng = rng_from_seed(derive_seed(cfg.seed, "skipgram"));
    let bound = 0.5 / d as f64;
    let mut target: Vec<f64> = (0..n_nodes * d)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    let mut context = vec![0.0f64; n_nodes * d];

    let pairs_per_epoch: usize = walks
        .iter()
        .map(|w| {
            (0..w.len())
                .map(|t| t.min(cfg.window) + (w.len() - 1 - t).min(cfg.window))
                .sum::<usize>()
        })
        .sum();
    let total_pairs = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let min_lr = cfg.learning_rate * 1e-4;

    let mut order: Vec<usize> = (0..walks.len()).collect();
    let mut grad = vec![0.0f64; d];
    let mut seen = 0usize;
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss = 0.0;
        let mut pairs = 0usize;
        for &wi in &order {
            let walk = &walks[wi];
            for (t, &center) in walk.iter().enumerate() {
                let lo = t.saturating_sub(cfg.window);
                let hi = (t + cfg.window).min(walk.len() - 1);
                for (c, &ctx) in walk.iter().enumerate().take(hi + 1).skip(lo) {
                    if c == t {
                        continue;
                    }
                    let lr = (cfg.learning_rate * (1.0 - seen as f64 / total_pairs)).max(min_lr);
                    seen += 1;
                    pairs += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    let v = center * d;
                    for k in 0..=cfg.negatives {
                        let (node, label) = if k == 0 {
                            (ctx, 1.0)
                        } else {
                            let neg = noise.sample(&mut rng);
                            if neg == ctx {
                                continue;
                            }
                            (neg, 0.0)
                        };
                        let u = node * d;
                        let score = dot(&target[v..v + d], &context[u..u + d]);
                        let s = sigmoid(score);
                        loss -= if label == 1.0 { s } else { 1.0 - s }.max(1e-12).ln();
                        let g = lr * (label - s);
                        for i in 0..d {
                            grad[i] += g * context[u + i];
                            context[u + i] += g * target[v + i];
                        }
                    }
                    for i in 0..d {
                        target[v + i] += grad[i];
                    }
                }
            }
        }
        epoch_losses.push(loss / pairs.max(1) as f64);
    }
    let vectors = Matrix::from_vec(n_nodes, d, target)?;
    let mut embedding = EmbeddingMatrix::dense(vectors)?;
    if cfg.normalize {
        embedding = embedding.l2_normalized();
    }
    Ok(SkipGramOutput {
        embedding,
        epoch_losses,
    })
}

/// Walks plus SkipGram in one call.
pub fn embed(g: &Graph, cfg: &WalkConfig) -> Result<SkipGramOutput> {
    let walks = sample_walks(g, cfg)?;
    train_skipgram(&walks, g.node_count(), cfg)
}
