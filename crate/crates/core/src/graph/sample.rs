use rand::seq::SliceRandom;

use super::{Graph, Masks, Subgraph};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

fn shuffled_nodes(n: usize, seed: u64) -> Vec<usize> {
    let mut nodes: Vec<usize> = (0..n).collect();
    nodes.shuffle(&mut rng_from_seed(seed));
    nodes
}

/// Partitions the nodes at random into two node-induced subgraphs.
///
/// The first side receives `round(fraction * n)` nodes. Within each side,
/// nodes keep their original relative order.
pub fn split_disjoint(g: &Graph, fraction: f64, seed: u64) -> Result<(Subgraph, Subgraph)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "split fraction must be in (0,1), got {fraction}"
        )));
    }
    let n = g.node_count();
    let k = (fraction * n as f64).round() as usize;
    if k == 0 || k == n {
        return Err(Error::invalid(format!(
            "fraction {fraction} of {n} nodes leaves one side empty"
        )));
    }
    let order = shuffled_nodes(n, seed);
    let mut first = order[..k].to_vec();
    let mut second = order[k..].to_vec();
    first.sort_unstable();
    second.sort_unstable();
    Ok((g.induced_subgraph(&first)?, g.induced_subgraph(&second)?))
}

/// Random partition of the nodes: part `i` receives `round(fractions[i] * n)`
/// nodes and one final part takes the rest. Each part is sorted.
pub fn partition_nodes(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>> {
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f))
        || fractions.iter().sum::<f64>() > 1.0 + 1e-12
    {
        return Err(Error::invalid(format!(
            "invalid partition fractions {fractions:?}"
        )));
    }
    let order = shuffled_nodes(n, seed);
    let mut parts = Vec::with_capacity(fractions.len() + 1);
    let mut start = 0;
    for f in fractions {
        let end = (start + (f * n as f64).round() as usize).min(n);
        parts.push(order[start..end].to_vec());
        start = end;
    }
    parts.push(order[start..].to_vec());
    parts.iter_mut().for_each(|p| p.sort_unstable());
    Ok(parts)
}

/// Samples disjoint train/validation/test masks uniformly at random.
pub fn make_inductive_masks(
    g: &Graph,
    n_train: usize,
    n_val: usize,
    n_test: usize,
    seed: u64,
) -> Result<Graph> {
    let n = g.node_count();
    if n_train + n_val + n_test > n {
        return Err(Error::invalid(format!(
            "split {n_train}/{n_val}/{n_test} exceeds {n} nodes"
        )));
    }
    let order = shuffled_nodes(n, seed);
    let mut masks = Masks::empty(n);
    for (pos, &v) in order.iter().enumerate() {
        if pos < n_train {
            masks.train[v] = true;
        } else if pos < n_train + n_val {
            masks.val[v] = true;
        } else if pos < n_train + n_val + n_test {
            masks.test[v] = true;
        }
    }
    g.clone().with_masks(masks)
}

/// Seeded node-induced subsample of at most `max_nodes` nodes; graphs that
/// already fit are returned whole.
pub fn subsample(g: &Graph, max_nodes: usize, seed: u64) -> Result<Subgraph> {
    let n = g.node_count();
    if n <= max_nodes {
        return g.induced_subgraph(&(0..n).collect::<Vec<_>>());
    }
    let mut nodes = shuffled_nodes(n, seed)[..max_nodes].to_vec();
    nodes.sort_unstable();
    g.induced_subgraph(&nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Matrix;

    fn path(n: usize) -> Graph {
        Graph::new((1..n).map(|i| (i - 1, i)), Matrix::zeros(n, 1), None, None).unwrap()
    }

    #[test]
    fn partition_covers_all_nodes() {
        let parts = partition_nodes(10, &[0.3, 0.1], 4).unwrap();
        assert_eq!(
            parts.iter().map(Vec::len).collect::<Vec<_>>(),
            vec![3, 1, 6]
        );
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        assert!(partition_nodes(10, &[0.7, 0.7], 0).is_err());
    }

    #[test]
    fn half_split_is_disjoint_and_deterministic() {
        let g = path(10);
        let (a, b) = split_disjoint(&g, 0.5, 11).unwrap();
        assert_eq!(a.graph.node_count(), 5);
        assert_eq!(b.graph.node_count(), 5);
        let mut all: Vec<usize> = a
            .original_ids
            .iter()
            .chain(&b.original_ids)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let (a2, _) = split_disjoint(&g, 0.5, 11).unwrap();
        assert_eq!(a.original_ids, a2.original_ids);
    }

    #[test]
    fn empty_side_rejected() {
        let g = path(4);
        assert!(split_disjoint(&g, 0.05, 1).is_err());
        assert!(split_disjoint(&g, 1.0, 1).is_err());
    }

    #[test]
    fn masks_have_requested_sizes() {
        let g = make_inductive_masks(&path(20), 5, 3, 7, 2).unwrap();
        assert_eq!(g.masks().train_nodes().len(), 5);
        assert_eq!(g.masks().val_nodes().len(), 3);
        assert_eq!(g.masks().test_nodes().len(), 7);
        assert!(make_inductive_masks(&path(20), 10, 10, 1, 2).is_err());
    }

    #[test]
    fn subsample_caps_size() {
        let s = subsample(&path(50), 20, 3).unwrap();
        assert_eq!(s.graph.node_count(), 20);
        assert_eq!(subsample(&path(5), 20, 3).unwrap().graph.node_count(), 5);
    }
}
