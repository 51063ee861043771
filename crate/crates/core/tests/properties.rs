//! Property tests for invariants that must hold on every input.

use gleak_core::attack::{confidence_attack, decode_inner_product, kmeans, sorted_prediction_rows};
use gleak_core::graph::{normalize_adjacency, AdjacencyNorm};
use gleak_core::metrics::{advantage, average_precision, f1_macro, roc_auc};
use gleak_core::tensor::Matrix;
use gleak_core::{EmbeddingMatrix, Graph};
use proptest::prelude::*;

/// Pair-counting AUC: fraction of (positive, negative) pairs ordered
/// correctly, ties counting one half.
fn auc_by_pairs(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                den += 1.0;
                num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    num / den
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=50)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(
                    prop_oneof![(0u8..6).prop_map(|v| v as f64 / 5.0), -10.0f64..10.0],
                    n,
                ),
                prop::collection::vec(any::<bool>(), n),
            )
        })
        .prop_filter("both classes", |(_, l)| {
            l.iter().any(|&b| b) && l.iter().any(|&b| !b)
        })
}

fn random_graph() -> impl Strategy<Value = Graph> {
    (1usize..12).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n), 0..30)
            .prop_map(move |edges| Graph::new(edges, Matrix::zeros(n, 1), None, None).unwrap())
    })
}

/// Largest |eigenvalue| of a symmetric matrix, via power iteration on M².
fn spectral_radius(m: &Matrix) -> f64 {
    let n = m.rows();
    let m2 = m.matmul(m).unwrap();
    let mut v = Matrix::from_vec(n, 1, (0..n).map(|i| 1.0 + 0.1 * i as f64).collect()).unwrap();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let w = m2.matmul(&v).unwrap();
        let norm = w.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lambda = norm / v.data().iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.scale(1.0 / norm);
    }
    lambda.sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn auc_matches_pair_counting((scores, labels) in scored_labels()) {
        let got = roc_auc(&scores, &labels).unwrap();
        prop_assert!((got - auc_by_pairs(&scores, &labels)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&got));
    }

    #[test]
    fn auc_ignores_monotone_transforms((scores, labels) in scored_labels()) {
        let cubed: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&cubed, &labels).unwrap());
    }

    #[test]
    fn ap_within_unit_interval((scores, labels) in scored_labels()) {
        let ap = average_precision(&scores, &labels).unwrap();
        prop_assert!(ap > 0.0 && ap <= 1.0);
    }

    #[test]
    fn advantage_is_antisymmetric(x in 0.0f64..=0.5) {
        // `0.5 ± x` is itself rounded, so equality holds to machine precision.
        prop_assert!((advantage(0.5 + x) + advantage(0.5 - x)).abs() <= 4.0 * f64::EPSILON);
    }

    #[test]
    fn f1_ignores_class_relabeling(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
        perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
    ) {
        let (p, l): (Vec<usize>, Vec<usize>) = pairs.into_iter().unzip();
        let pp: Vec<usize> = p.iter().map(|&c| perm[c]).collect();
        let pl: Vec<usize> = l.iter().map(|&c| perm[c]).collect();
        let a = f1_macro(&p, &l, 4).unwrap();
        let b = f1_macro(&pp, &pl, 4).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn sym_normalization_is_symmetric_and_contracting(g in random_graph()) {
        let a = normalize_adjacency(&g, AdjacencyNorm::Sym).matrix;
        prop_assert_eq!(&a, &a.transpose());
        prop_assert!(spectral_radius(&a) <= 1.0 + 1e-9);
    }

    #[test]
    fn rw_normalization_is_stochastic(g in random_graph()) {
        let a = normalize_adjacency(&g, AdjacencyNorm::Rw).matrix;
        for r in 0..a.rows() {
            prop_assert!((a.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn graphs_are_canonical(g in random_graph()) {
        for &(i, j) in g.edges() {
            prop_assert!(i < j);
            prop_assert!(g.has_edge(j, i));
        }
        let mut e = g.edges().to_vec();
        e.dedup();
        prop_assert_eq!(e.len(), g.edge_count());
        let degree_sum: usize = (0..g.node_count()).map(|v| g.degree(v)).sum();
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
    }

    #[test]
    fn induced_subgraph_keeps_exactly_internal_edges(g in random_graph(), mask in prop::collection::vec(any::<bool>(), 12)) {
        let nodes: Vec<usize> = (0..g.node_count()).filter(|&v| mask[v]).collect();
        let sub = g.induced_subgraph(&nodes).unwrap();
        let expected = g.edges().iter().filter(|(a, b)| mask[*a] && mask[*b]).count();
        prop_assert_eq!(sub.graph.edge_count(), expected);
        for &(a, b) in sub.graph.edges() {
            prop_assert!(g.has_edge(sub.original_ids[a], sub.original_ids[b]));
        }
    }

    #[test]
    fn inner_product_scores_are_symmetric(data in prop::collection::vec(-3.0f64..3.0, 1..60), d in 1usize..4) {
        let n = data.len() / d;
        prop_assume!(n >= 1);
        let z = Matrix::from_vec(n, d, data[..n * d].to_vec()).unwrap();
        let s = decode_inner_product(&z);
        for i in 0..n {
            prop_assert_eq!(s[(i, i)], 0.0);
            for j in 0..n {
                prop_assert!((s[(i, j)] - s[(j, i)]).abs() <= 1e-9);
                prop_assert!((0.0..=1.0).contains(&s[(i, j)]));
            }
        }
    }

    #[test]
    fn sorted_prediction_rows_descend_and_sum_to_one(raw in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..20)) {
        let probs = Matrix::from_rows(&raw).unwrap().softmax_rows();
        let sorted = sorted_prediction_rows(&probs);
        for r in 0..sorted.rows() {
            let row = sorted.row(r);
            prop_assert!(row.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn confidence_attack_obeys_advantage_identity(raw in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..15)) {
        let mut rows = raw.clone();
        rows.extend(raw.iter().map(|r| vec![r[1], r[0] * 0.5]));
        let probs = Matrix::from_rows(&rows).unwrap().softmax_rows();
        let truth: Vec<bool> = (0..rows.len()).map(|i| i < raw.len()).collect();
        let r = confidence_attack(&probs, &truth, None).unwrap();
        prop_assert_eq!(r.advantage(), 2.0 * (r.accuracy() - 0.5));
    }

    #[test]
    fn kmeans_inertia_is_monotone(data in prop::collection::vec(-10.0f64..10.0, 8..80), k in 1usize..4) {
        let pts = Matrix::from_vec(data.len() / 2, 2, data[..data.len() / 2 * 2].to_vec()).unwrap();
        if let Ok(r) = kmeans(&pts, k, 7) {
            for w in r.inertia.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-9);
            }
        }
    }

    #[test]
    fn matmul_matches_naive_product(a in prop::collection::vec(-2.0f64..2.0, 12), b in prop::collection::vec(-2.0f64..2.0, 8)) {
        let ma = Matrix::from_vec(3, 4, a.clone()).unwrap();
        let mb = Matrix::from_vec(4, 2, b.clone()).unwrap();
        let c = ma.matmul(&mb).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let naive: f64 = (0..4).map(|t| a[i * 4 + t] * b[t * 2 + j]).sum();
                prop_assert!((c[(i, j)] - naive).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn embedding_csv_round_trips(data in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
        let m = Matrix::from_vec(data.len(), 1, data).unwrap();
        let e = EmbeddingMatrix::dense(m).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        e.save_csv(&path).unwrap();
        let back = EmbeddingMatrix::load_csv(&path).unwrap();
        prop_assert_eq!(back, e);
    }
}
