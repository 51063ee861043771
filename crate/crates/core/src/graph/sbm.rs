//! Stochastic block model generator with planted labels and attributes.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};
use crate::tensor::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_intra: f64,
    pub p_inter: f64,
    /// Must be at least the number of blocks.
    pub feature_dim: usize,
    /// Amplitude of the one-hot block indicator added to unit Gaussian noise.
    pub class_signal: f64,
    /// Probability that a node's sensitive attribute equals `block mod attribute_categories`;
    /// otherwise it is drawn uniformly.
    pub attribute_correlation: f64,
    pub attribute_categories: usize,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            block_sizes: vec![200, 200],
            p_intra: 0.05,
            p_inter: 0.005,
            feature_dim: 16,
            class_signal: 1.0,
            attribute_correlation: 0.9,
            attribute_categories: 2,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return Err(Error::invalid("sbm blocks must be non-empty"));
        }
        if !(0.0 <= self.p_inter && self.p_inter < self.p_intra && self.p_intra <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 <= p_inter < p_intra <= 1, got p_inter={} p_intra={}",
                self.p_inter, self.p_intra
            )));
        }
        if self.feature_dim < self.block_sizes.len() {
            return Err(Error::invalid(
                "feature_dim must be at least the number of blocks",
            ));
        }
        if !(0.0..=1.0).contains(&self.attribute_correlation) || self.attribute_categories < 2 {
            return Err(Error::invalid(
                "attribute_correlation must be in [0,1] and attribute_categories >= 2",
            ));
        }
        Ok(())
    }
}

/// Samples an SBM graph. Labels are block ids.
pub fn generate_sbm(cfg: &SbmConfig, seed: u64) -> Result<Graph> {
    cfg.validate()?;
    let blocks: Vec<usize> = cfg
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = blocks.len();

    let mut rng = rng_from_seed(derive_seed(seed, "sbm/edges"));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if blocks[i] == blocks[j] {
                cfg.p_intra
            } else {
                cfg.p_inter
            };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let mut rng = rng_from_seed(derive_seed(seed, "sbm/features"));
    let mut features = Matrix::zeros(n, cfg.feature_dim);
    for (i, &b) in blocks.iter().enumerate() {
        let row = features.row_mut(i);
        for v in row.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        row[b] += cfg.class_signal;
    }

    let mut rng = rng_from_seed(derive_seed(seed, "sbm/attributes"));
    let k = cfg.attribute_categories;
    let attributes = blocks
        .iter()
        .map(|&b| {
            if rng.random::<f64>() < cfg.attribute_correlation {
                b % k
            } else {
                rng.random_range(0..k)
            }
        })
        .collect();

    Graph::new(edges, features, Some(blocks), Some(attributes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_inter_edges_when_p_inter_zero() {
        let cfg = SbmConfig {
            block_sizes: vec![30, 30],
            p_intra: 0.3,
            p_inter: 0.0,
            ..Default::default()
        };
        let g = generate_sbm(&cfg, 4).unwrap();
        let labels = g.labels().unwrap();
        assert!(g.edges().iter().all(|&(a, b)| labels[a] == labels[b]));
        assert!(g.edge_count() > 0);
    }

    #[test]
    fn edge_counts_match_binomial_expectation() {
        let cfg = SbmConfig {
            block_sizes: vec![50, 50],
            p_intra: 0.2,
            p_inter: 0.01,
            ..Default::default()
        };
        // Each pair is an independent Bernoulli draw, so counts are binomial.
        let intra_pairs: f64 = 2.0 * (50.0 * 49.0 / 2.0);
        let inter_pairs: f64 = 50.0 * 50.0;
        for seed in 0..20 {
            let g = generate_sbm(&cfg, seed).unwrap();
            let labels = g.labels().unwrap();
            let intra = g
                .edges()
                .iter()
                .filter(|&&(a, b)| labels[a] == labels[b])
                .count() as f64;
            let inter = g.edge_count() as f64 - intra;
            for (count, pairs, p) in [(intra, intra_pairs, 0.2), (inter, inter_pairs, 0.01)] {
                let (mean, sd) = (pairs * p, (pairs * p * (1.0 - p)).sqrt());
                assert!(
                    (count - mean).abs() <= 4.0 * sd,
                    "seed {seed}: {count} vs {mean} ± 4·{sd}"
                );
            }
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            SbmConfig {
                block_sizes: vec![10, 0],
                ..Default::default()
            },
            SbmConfig {
                p_inter: 0.2,
                p_intra: 0.1,
                ..Default::default()
            },
            SbmConfig {
                feature_dim: 1,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(generate_sbm(&cfg, 0).is_err());
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SbmConfig::default();
        assert_eq!(
            generate_sbm(&cfg, 9).unwrap(),
            generate_sbm(&cfg, 9).unwrap()
        );
    }
}
