//! Text formats for graphs.
//!
//! * edges: one `src dst` pair of node ids per line (whitespace separated).
//! * features: CSV, one row of comma-separated reals per node; row `i` is node `i`.
//! * labels / attributes: CSV lines `node,value` with non-negative integer values.
//! * masks: CSV lines `node,split` with split one of `train`, `val`, `test`.
//!
//! Blank lines and lines starting with `#` are ignored everywhere. Reals are
//! written with the shortest representation that parses back to the same
//! `f64`, so save followed by load is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{Graph, Masks};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Locations of the files making up one graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
}

impl GraphFiles {
    /// Conventional file names inside `dir`; optional files are included
    /// only if they exist.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Self {
            edges: dir.join("edges.txt"),
            features: dir.join("features.csv"),
            labels: opt("labels.csv"),
            attributes: opt("attributes.csv"),
        }
    }

    /// All four conventional names inside `dir`, for writing.
    pub fn for_writing(dir: &Path) -> Self {
        Self {
            edges: dir.join("edges.txt"),
            features: dir.join("features.csv"),
            labels: Some(dir.join("labels.csv")),
            attributes: Some(dir.join("attributes.csv")),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_edges(path: &Path) -> Result<Vec<(usize, usize, usize)>> {
    let text = read(path)?;
    content_lines(&text)
        .map(|(ln, line)| {
            let mut parts = line.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .ok_or_else(|| parse_err(path, ln, "expected `src dst`"))?
                    .parse()
                    .map_err(|e| parse_err(path, ln, format!("bad node id: {e}")))
            };
            let (a, b) = (next()?, next()?);
            if parts.next().is_some() {
                return Err(parse_err(path, ln, "expected exactly two node ids"));
            }
            Ok((ln, a, b))
        })
        .collect()
}

fn parse_features(path: &Path) -> Result<Matrix> {
    let text = read(path)?;
    let mut rows = Vec::new();
    let mut width = None;
    for (ln, line) in content_lines(&text) {
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(path, ln, format!("bad feature value `{s}`: {e}")))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    path,
                    ln,
                    format!("ragged feature row: {} values, expected {w}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

fn parse_node_values(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut values: Vec<Option<usize>> = vec![None; n];
    for (ln, line) in content_lines(&text) {
        let (node, value) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, ln, "expected `node,value`"))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|e| parse_err(path, ln, format!("bad node id: {e}")))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|e| parse_err(path, ln, format!("bad value: {e}")))?;
        if node >= n {
            return Err(parse_err(
                path,
                ln,
                format!("node {node} out of range for {n} nodes"),
            ));
        }
        if values[node].replace(value).is_some() {
            return Err(parse_err(path, ln, format!("duplicate node {node}")));
        }
    }
    values
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| parse_err(path, 0, format!("node {i} has no value"))))
        .collect()
}

/// Reads a graph; the node count is the number of feature rows.
pub fn load_graph(files: &GraphFiles) -> Result<Graph> {
    let features = parse_features(&files.features)?;
    let n = features.rows();
    let edges = parse_edges(&files.edges)?;
    if let Some(&(ln, a, b)) = edges.iter().find(|&&(_, a, b)| a >= n || b >= n) {
        return Err(parse_err(
            &files.edges,
            ln,
            format!("edge ({a}, {b}) has an endpoint >= {n} nodes"),
        ));
    }
    let labels = files
        .labels
        .as_deref()
        .map(|p| parse_node_values(p, n))
        .transpose()?;
    let attributes = files
        .attributes
        .as_deref()
        .map(|p| parse_node_values(p, n))
        .transpose()?;
    Graph::new(
        edges.into_iter().map(|(_, a, b)| (a, b)),
        features,
        labels,
        attributes,
    )
}

/// Writes a graph in the formats read by [`load_graph`]. Optional files are
/// only written when both the path and the data are present.
pub fn save_graph(g: &Graph, files: &GraphFiles) -> Result<()> {
    let mut edges = String::new();
    for &(a, b) in g.edges() {
        let _ = writeln!(edges, "{a} {b}");
    }
    write(&files.edges, &edges)?;

    let mut feats = String::new();
    for r in 0..g.node_count() {
        write_reals(&mut feats, g.features().row(r));
        feats.push('\n');
    }
    write(&files.features, &feats)?;

    for (path, values) in [
        (&files.labels, g.labels()),
        (&files.attributes, g.attributes()),
    ] {
        if let (Some(path), Some(values)) = (path, values) {
            let mut out = String::new();
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(out, "{i},{v}");
            }
            write(path, &out)?;
        }
    }
    Ok(())
}

pub(crate) fn write_reals(out: &mut String, values: &[f64]) {
    for (j, v) in values.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
}

pub fn save_masks(masks: &Masks, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..masks.len() {
        let split = if masks.train[i] {
            "train"
        } else if masks.val[i] {
            "val"
        } else if masks.test[i] {
            "test"
        } else {
            continue;
        };
        let _ = writeln!(out, "{i},{split}");
    }
    write(path, &out)
}

pub fn load_masks(path: &Path, n: usize) -> Result<Masks> {
    let text = read(path)?;
    let mut masks = Masks::empty(n);
    for (ln, line) in content_lines(&text) {
        let (node, split) = line
            .split_once(',')
            .ok_or_else(|| parse_err(path, ln, "expected `node,split`"))?;
        let node: usize = node
            .trim()
            .parse()
            .map_err(|e| parse_err(path, ln, format!("bad node id: {e}")))?;
        if node >= n {
            return Err(parse_err(path, ln, format!("node {node} out of range")));
        }
        let slot = match split.trim() {
            "train" => &mut masks.train,
            "val" => &mut masks.val,
            "test" => &mut masks.test,
            other => return Err(parse_err(path, ln, format!("unknown split `{other}`"))),
        };
        slot[node] = true;
    }
    masks.validate(n)?;
    Ok(masks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_files(dir: &Path, edges: &str, features: &str) -> GraphFiles {
        fs::write(dir.join("edges.txt"), edges).unwrap();
        fs::write(dir.join("features.csv"), features).unwrap();
        GraphFiles::in_dir(dir)
    }

    #[test]
    fn triangle_loads() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_files(dir.path(), "0 1\n1 2\n0 2\n", "1,0\n0,1\n1,1\n");
        let g = load_graph(&files).unwrap();
        assert_eq!((g.node_count(), g.edge_count(), g.feature_dim()), (3, 3, 2));
    }

    #[test]
    fn reversed_duplicate_is_one_edge() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_files(dir.path(), "# comment\n0 1\n1 0\n", "0\n0\n");
        assert_eq!(load_graph(&files).unwrap().edge_count(), 1);
    }

    #[test]
    fn loader_errors() {
        let dir = tempfile::tempdir().unwrap();
        let files = write_files(dir.path(), "0 5\n", "0\n0\n");
        let err = load_graph(&files).unwrap_err().to_string();
        assert!(err.contains("endpoint"), "{err}");

        let files = write_files(dir.path(), "0 1\n", "0,1\n0\n");
        let err = load_graph(&files).unwrap_err().to_string();
        assert!(err.contains("ragged"), "{err}");

        let files = write_files(dir.path(), "0 1\n", "0\n0\n");
        fs::write(dir.path().join("labels.csv"), "0,1\n0,2\n1,0\n").unwrap();
        let files = GraphFiles {
            labels: Some(dir.path().join("labels.csv")),
            ..files
        };
        let err = load_graph(&files).unwrap_err().to_string();
        assert!(err.contains("duplicate node 0"), "{err}");
    }

    #[test]
    fn masks_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Masks::empty(4);
        m.train[0] = true;
        m.val[2] = true;
        m.test[3] = true;
        let p = dir.path().join("masks.csv");
        save_masks(&m, &p).unwrap();
        assert_eq!(load_masks(&p, 4).unwrap(), m);
    }
}
