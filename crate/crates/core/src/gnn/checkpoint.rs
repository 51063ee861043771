//! Plain-text model checkpoints.
//!
//! ```text
//! gleak-checkpoint 1
//! config {"arch":"gcn",...}
//! history [{"epoch":1,...},...]
//! weights 2
//! matrix 16 8
//! <8 comma-separated reals>   (16 lines, row-major)
//! matrix 8 2
//! ...
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EpochStats, GnnConfig, NodeClassifier};
use crate::error::{Error, Result};
use crate::graph::write_reals;
use crate::tensor::Matrix;

const MAGIC: &str = "gleak-checkpoint 1";

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("plain data serializes")
}

pub fn save_checkpoint(model: &NodeClassifier, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "config {}", json(model.config()));
    let _ = writeln!(out, "history {}", json(&model.history()));
    let _ = writeln!(out, "weights {}", model.weights().len());
    for w in model.weights() {
        let _ = writeln!(out, "matrix {} {}", w.rows(), w.cols());
        for r in 0..w.rows() {
            write_reals(&mut out, w.row(r));
            out.push('\n');
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<NodeClassifier> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(0, format!("unexpected end of file, expected {what}")))
    };

    let (ln, magic) = next("header")?;
    if magic.trim() != MAGIC {
        return Err(err(ln, format!("not a checkpoint (header `{magic}`)")));
    }
    let (ln, line) = next("config")?;
    let config: GnnConfig = line
        .strip_prefix("config ")
        .ok_or_else(|| err(ln, "expected `config`".into()))
        .and_then(|s| serde_json::from_str(s).map_err(|e| err(ln, e.to_string())))?;
    let (ln, line) = next("history")?;
    let history: Vec<EpochStats> = line
        .strip_prefix("history ")
        .ok_or_else(|| err(ln, "expected `history`".into()))
        .and_then(|s| serde_json::from_str(s).map_err(|e| err(ln, e.to_string())))?;
    let (ln, line) = next("weights")?;
    let count: usize = line
        .strip_prefix("weights ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| err(ln, "expected `weights <count>`".into()))?;

    let mut weights = Vec::with_capacity(count);
    for _ in 0..count {
        let (ln, line) = next("matrix header")?;
        let dims: Vec<usize> = line
            .strip_prefix("matrix ")
            .map(|s| {
                s.split_whitespace()
                    .filter_map(|t| t.parse().ok())
                    .collect()
            })
            .unwrap_or_default();
        let [rows, cols] = dims[..] else {
            return Err(err(ln, "expected `matrix <rows> <cols>`".into()));
        };
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let (ln, line) = next("matrix row")?;
            let row = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| err(ln, format!("bad value: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != cols {
                return Err(err(
                    ln,
                    format!("row has {} values, expected {cols}", row.len()),
                ));
            }
            data.extend(row);
        }
        weights.push(Matrix::from_vec(rows, cols, data)?);
    }
    NodeClassifier::from_weights(&config, weights, history)
}
