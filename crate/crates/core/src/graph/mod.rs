//! Undirected attributed graphs and the operations attacks need on them.

mod io;
mod norm;
mod sample;
mod sbm;

pub(crate) use io::write_reals;
pub use io::{load_graph, load_masks, save_graph, save_masks, GraphFiles};
pub use norm::{neighbor_mean_operator, normalize_adjacency, AdjacencyNorm, NormalizedAdjacency};
pub use sample::{make_inductive_masks, partition_nodes, split_disjoint, subsample};
pub use sbm::{generate_sbm, SbmConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Disjoint train/validation/test node masks.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Masks {
    pub fn empty(n: usize) -> Self {
        Self {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.train.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train.is_empty()
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.train.len() != n || self.val.len() != n || self.test.len() != n {
            return Err(Error::invalid(format!("masks must have length {n}")));
        }
        for i in 0..n {
            let count =
                usize::from(self.train[i]) + usize::from(self.val[i]) + usize::from(self.test[i]);
            if count > 1 {
                return Err(Error::invalid(format!("node {i} is in more than one mask")));
            }
        }
        Ok(())
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        indices(&self.train)
    }

    pub fn val_nodes(&self) -> Vec<usize> {
        indices(&self.val)
    }

    pub fn test_nodes(&self) -> Vec<usize> {
        indices(&self.test)
    }

    fn select(&self, nodes: &[usize]) -> Masks {
        Masks {
            train: nodes.iter().map(|&v| self.train[v]).collect(),
            val: nodes.iter().map(|&v| self.val[v]).collect(),
            test: nodes.iter().map(|&v| self.test[v]).collect(),
        }
    }
}

fn indices(mask: &[bool]) -> Vec<usize> {
    mask.iter()
        .enumerate()
        .filter_map(|(i, &m)| m.then_some(i))
        .collect()
}

/// An undirected graph with node features and optional labels.
///
/// Edges are stored once as `(i, j)` with `i < j`; there are no self-loops or
/// duplicates. Values are immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    features: Matrix,
    labels: Option<Vec<usize>>,
    attributes: Option<Vec<usize>>,
    masks: Masks,
}

impl Graph {
    /// Builds a graph; the node count is the number of feature rows.
    ///
    /// Edge pairs are canonicalized, deduplicated and stripped of self-loops.
    pub fn new(
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Matrix,
        labels: Option<Vec<usize>>,
        attributes: Option<Vec<usize>>,
    ) -> Result<Self> {
        let n = features.rows();
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            for v in [a, b] {
                if v >= n {
                    return Err(Error::NodeOutOfRange { node: v, n });
                }
            }
            if a != b {
                canon.push((a.min(b), a.max(b)));
            }
        }
        canon.sort_unstable();
        canon.dedup();
        for (name, vals) in [("labels", &labels), ("attributes", &attributes)] {
            if let Some(v) = vals {
                if v.len() != n {
                    return Err(Error::invalid(format!(
                        "{name} has {} entries for {n} nodes",
                        v.len()
                    )));
                }
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &canon {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|v| v.sort_unstable());
        Ok(Self {
            edges: canon,
            neighbors,
            features,
            labels,
            attributes,
            masks: Masks::empty(n),
        })
    }

    pub fn with_masks(mut self, masks: Masks) -> Result<Self> {
        masks.validate(self.node_count())?;
        self.masks = masks;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.features.rows()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors[v].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.node_count() && self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn attributes(&self) -> Option<&[usize]> {
        self.attributes.as_deref()
    }

    /// Number of classes, `max(label) + 1`.
    pub fn class_count(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }

    pub fn attribute_count(&self) -> usize {
        self.attributes
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(0, |m| m + 1)
    }

    pub fn masks(&self) -> &Masks {
        &self.masks
    }

    /// Dense 0/1 adjacency matrix without self-loops.
    pub fn adjacency(&self) -> Matrix {
        let n = self.node_count();
        let mut a = Matrix::zeros(n, n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    pub fn check_node(&self, v: usize) -> Result<()> {
        if v >= self.node_count() {
            return Err(Error::NodeOutOfRange {
                node: v,
                n: self.node_count(),
            });
        }
        Ok(())
    }

    /// Node-induced subgraph: nodes keep the given order, edges survive when
    /// both endpoints are selected. Labels, attributes and masks follow.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Result<Subgraph> {
        let n = self.node_count();
        let mut remap = vec![usize::MAX; n];
        for (new, &old) in nodes.iter().enumerate() {
            self.check_node(old)?;
            if remap[old] != usize::MAX {
                return Err(Error::invalid(format!("node {old} selected twice")));
            }
            remap[old] = new;
        }
        let edges = self.edges.iter().filter_map(|&(a, b)| {
            let (ra, rb) = (remap[a], remap[b]);
            (ra != usize::MAX && rb != usize::MAX).then_some((ra, rb))
        });
        let pick =
            |v: &Option<Vec<usize>>| v.as_ref().map(|v| nodes.iter().map(|&i| v[i]).collect());
        let graph = Graph::new(
            edges,
            self.features.select_rows(nodes),
            pick(&self.labels),
            pick(&self.attributes),
        )?
        .with_masks(self.masks.select(nodes))?;
        Ok(Subgraph {
            graph,
            original_ids: nodes.to_vec(),
        })
    }

    /// Induced subgraph on the training-mask nodes.
    pub fn train_subgraph(&self) -> Result<Subgraph> {
        self.induced_subgraph(&self.masks.train_nodes())
    }

    /// Induced subgraph on the test-mask nodes. Validation nodes belong to
    /// neither side, so they can serve as adversary knowledge.
    pub fn heldout_subgraph(&self) -> Result<Subgraph> {
        self.induced_subgraph(&self.masks.test_nodes())
    }
}

/// A node-induced subgraph together with the ids its nodes had in the parent.
#[derive(Clone, Debug)]
pub struct Subgraph {
    pub graph: Graph,
    pub original_ids: Vec<usize>,
}

impl Subgraph {
    /// Local id of a parent node, if it was selected.
    pub fn local_id(&self, original: usize) -> Option<usize> {
        self.original_ids.iter().position(|&v| v == original)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::new([(0, 1), (1, 2), (0, 2)], Matrix::zeros(3, 2), None, None).unwrap()
    }

    #[test]
    fn dedup_and_self_loops() {
        let g = Graph::new(
            [(0, 1), (1, 0), (2, 2), (1, 2)],
            Matrix::zeros(3, 1),
            None,
            None,
        )
        .unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn endpoint_out_of_range() {
        let err = Graph::new([(0, 3)], Matrix::zeros(3, 1), None, None).unwrap_err();
        assert!(matches!(err, Error::NodeOutOfRange { node: 3, n: 3 }));
    }

    #[test]
    fn overlapping_masks_rejected() {
        let mut m = Masks::empty(3);
        m.train[0] = true;
        m.test[0] = true;
        assert!(triangle().with_masks(m).is_err());
    }

    #[test]
    fn induced_subgraph_keeps_internal_edges() {
        let g = triangle();
        let s = g.induced_subgraph(&[2, 0]).unwrap();
        assert_eq!(s.graph.node_count(), 2);
        assert_eq!(s.graph.edges(), &[(0, 1)]);
        assert_eq!(s.original_ids, vec![2, 0]);
        assert_eq!(s.local_id(0), Some(1));
        assert!(g.induced_subgraph(&[0, 0]).is_err());
    }
}
