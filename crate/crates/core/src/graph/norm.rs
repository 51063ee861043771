use serde::{Deserialize, Serialize};

use super::Graph;
use crate::tensor::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyNorm {
    /// `D^{-1/2} (A + I) D^{-1/2}`
    Sym,
    /// `D^{-1} (A + I)`
    Rw,
}

#[derive(Clone, Debug)]
pub struct NormalizedAdjacency {
    pub mode: AdjacencyNorm,
    pub matrix: Matrix,
}

/// Adds self-loops and normalizes by the degree of `A + I`.
///
/// Isolated nodes end up with a single self-loop of weight 1.
pub fn normalize_adjacency(g: &Graph, mode: AdjacencyNorm) -> NormalizedAdjacency {
    let n = g.node_count();
    let deg: Vec<f64> = (0..n).map(|v| (g.degree(v) + 1) as f64).collect();
    let mut m = Matrix::zeros(n, n);
    let weight = |i: usize, j: usize| match mode {
        AdjacencyNorm::Sym => 1.0 / (deg[i] * deg[j]).sqrt(),
        AdjacencyNorm::Rw => 1.0 / deg[i],
    };
    for i in 0..n {
        m[(i, i)] = weight(i, i);
        for &j in g.neighbors(i) {
            m[(i, j)] = weight(i, j);
        }
    }
    NormalizedAdjacency { mode, matrix: m }
}

/// Row-stochastic neighbor averaging without self-loops; rows of isolated
/// nodes are zero.
pub fn neighbor_mean_operator(g: &Graph) -> Matrix {
    let n = g.node_count();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        let d = g.degree(i);
        for &j in g.neighbors(i) {
            m[(i, j)] = 1.0 / d as f64;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::new(edges.iter().copied(), Matrix::zeros(n, 1), None, None).unwrap()
    }

    #[test]
    fn single_edge_sym() {
        let a = normalize_adjacency(&graph(2, &[(0, 1)]), AdjacencyNorm::Sym);
        assert_eq!(a.matrix.data(), &[0.5, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn isolated_node() {
        for mode in [AdjacencyNorm::Sym, AdjacencyNorm::Rw] {
            let a = normalize_adjacency(&graph(1, &[]), mode);
            assert_eq!(a.matrix.data(), &[1.0]);
        }
    }

    #[test]
    fn rw_rows_sum_to_one() {
        let g = graph(5, &[(0, 1), (1, 2), (2, 3), (1, 3)]);
        let a = normalize_adjacency(&g, AdjacencyNorm::Rw);
        for r in 0..5 {
            let s: f64 = a.matrix.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn neighbor_mean_star() {
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let m = neighbor_mean_operator(&g);
        assert_eq!(m.row(0), &[0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(m.row(1), &[1.0, 0.0, 0.0, 0.0]);
        let lonely = neighbor_mean_operator(&graph(1, &[]));
        assert_eq!(lonely.data(), &[0.0]);
    }
}
