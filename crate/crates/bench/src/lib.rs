//! Shared fixtures for the benchmarks.

use gleak_core::graph::{generate_sbm, make_inductive_masks, SbmConfig};
use gleak_core::{Graph, Matrix};

/// Deterministic dense matrix with entries in [-1, 1].
pub fn dense(rows: usize, cols: usize, salt: u64) -> Matrix {
    let data = (0..rows * cols)
        .map(|i| {
            ((i as u64).wrapping_mul(2_654_435_761).wrapping_add(salt) % 2001) as f64 / 1000.0 - 1.0
        })
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches data")
}

/// Two-block SBM with `n` nodes and a 30/30/30 percent split.
pub fn sbm(n: usize) -> Graph {
    let cfg = SbmConfig {
        block_sizes: vec![n / 2, n - n / 2],
        p_intra: 10.0 / n as f64,
        p_inter: 1.0 / n as f64,
        ..SbmConfig::default()
    };
    let g = generate_sbm(&cfg, 7).expect("valid sbm");
    let part = (n as f64 * 0.3).round() as usize;
    make_inductive_masks(&g, part, part, part, 11).expect("masks fit")
}

/// Scores and labels for ranking metrics; roughly a quarter are positive.
pub fn ranking_case(n: usize) -> (Vec<f64>, Vec<bool>) {
    let scores: Vec<f64> = dense(n, 1, 3).into_data();
    let labels = scores
        .iter()
        .enumerate()
        .map(|(i, s)| (s + (i % 5) as f64 * 0.1) > 0.4)
        .collect();
    (scores, labels)
}
