//! Released node embeddings and their CSV exchange format.
//!
//! One line per node: `node_id,v1,...,vd`, no header. Values round-trip
//! exactly.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::write_reals;
use crate::tensor::Matrix;

/// A d-dimensional vector per node.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    node_ids: Vec<usize>,
    vectors: Matrix,
}

impl EmbeddingMatrix {
    pub fn new(node_ids: Vec<usize>, vectors: Matrix) -> Result<Self> {
        if node_ids.len() != vectors.rows() {
            return Err(Error::invalid(format!(
                "{} node ids for {} embedding rows",
                node_ids.len(),
                vectors.rows()
            )));
        }
        if !vectors.is_finite() {
            return Err(Error::invalid("embedding contains non-finite values"));
        }
        Ok(Self { node_ids, vectors })
    }

    /// Embedding whose row `i` belongs to node `i`.
    pub fn dense(vectors: Matrix) -> Result<Self> {
        Self::new((0..vectors.rows()).collect(), vectors)
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.node_ids
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn into_vectors(self) -> Matrix {
        self.vectors
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    /// Rows for the given node ids, in that order.
    pub fn rows_for(&self, nodes: &[usize]) -> Result<Matrix> {
        let index: HashMap<usize, usize> = self
            .node_ids
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .collect();
        let rows = nodes
            .iter()
            .map(|v| {
                index
                    .get(v)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("no embedding for node {v}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.vectors.select_rows(&rows))
    }

    pub fn l2_normalized(&self) -> Self {
        Self {
            node_ids: self.node_ids.clone(),
            vectors: self.vectors.l2_normalize_rows(),
        }
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (i, id) in self.node_ids.iter().enumerate() {
            out.push_str(&id.to_string());
            if self.dim() > 0 {
                out.push(',');
            }
            write_reals(&mut out, self.vectors.row(i));
            out.push('\n');
        }
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut ids = Vec::new();
        let mut rows = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: ln + 1,
                message,
            };
            let mut parts = line.split(',');
            let id: usize = parts
                .next()
                .unwrap_or_default()
                .trim()
                .parse()
                .map_err(|e| err(format!("bad node id: {e}")))?;
            let row = parts
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| err(format!("bad value `{s}`: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                let first: &Vec<f64> = first;
                if first.len() != row.len() {
                    return Err(err(format!(
                        "ragged row: {} values, expected {}",
                        row.len(),
                        first.len()
                    )));
                }
            }
            ids.push(id);
            rows.push(row);
        }
        Self::new(ids, Matrix::from_rows(&rows)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let m = Matrix::from_rows(&[vec![0.1, -1e-300, 3.0], vec![1.0 / 3.0, 2e10, -0.0]]).unwrap();
        let e = EmbeddingMatrix::new(vec![4, 9], m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("emb.csv");
        e.save_csv(&p).unwrap();
        let back = EmbeddingMatrix::load_csv(&p).unwrap();
        assert_eq!(back.node_ids(), e.node_ids());
        for (a, b) in back.vectors().data().iter().zip(e.vectors().data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn rows_for_lookup() {
        let e = EmbeddingMatrix::new(
            vec![5, 2],
            Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap(),
        )
        .unwrap();
        assert_eq!(e.rows_for(&[2, 5]).unwrap().data(), &[2.0, 1.0]);
        assert!(e.rows_for(&[3]).is_err());
    }
}
