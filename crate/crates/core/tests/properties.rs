//! Property tests for the structural invariants that hold on every input,
//! not just the pinned fixtures.

use ndarray::{Array1, Array2};
use proptest::prelude::*;

use specfilt_core::bounds::clamp;
use specfilt_core::filters::PolynomialFilter;
use specfilt_core::graph::{eigendecompose, normalize, LabeledGraph};
use specfilt_core::indicators::{interaction_sequence, signal_spectrum};
use specfilt_core::linalg::sym_eigen;

/// Random small labeled graph: node count, arbitrary edge pairs, binary
/// labels with both classes forced present.
fn labeled_graph_strategy() -> impl Strategy<Value = LabeledGraph> {
    (3usize..16)
        .prop_flat_map(|n| {
            let edges = prop::collection::vec((0..n, 0..n), 0..(2 * n));
            let labels = prop::collection::vec(0usize..2, n);
            (Just(n), edges, labels)
        })
        .prop_map(|(n, edges, mut labels)| {
            labels[0] = 0;
            labels[n - 1] = 1;
            LabeledGraph::from_edges(&edges, &labels).expect("ids in range")
        })
}

proptest! {
    #[test]
    fn symmetrization_ignores_edge_order_and_duplicates(
        graph in labeled_graph_strategy(),
        shuffle_seed in 0u64..1000,
    ) {
        // Rebuild from the extracted undirected edge list in a different
        // order, with every edge also reversed: same adjacency.
        let n = graph.node_count();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if graph.adjacency()[[i, j]] != 0.0 {
                    edges.push((j, i));
                    edges.push((i, j));
                }
            }
        }
        if shuffle_seed % 2 == 0 {
            edges.reverse();
        }
        let rebuilt = LabeledGraph::from_edges(&edges, graph.labels()).unwrap();
        prop_assert_eq!(rebuilt.adjacency(), graph.adjacency());
    }

    #[test]
    fn random_walk_rows_are_stochastic(graph in labeled_graph_strategy()) {
        let ops = normalize(&graph);
        for row in ops.random_walk.rows() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn laplacian_spectrum_lies_in_unit_band(graph in labeled_graph_strategy()) {
        let sd = eigendecompose(&normalize(&graph)).unwrap();
        prop_assert_eq!(sd.preclamp_violations(), 0);
        for &l in sd.eigenvalues() {
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&l));
        }
        // One zero eigenvalue per connected component.
        prop_assert_eq!(sd.zero_multiplicity(), graph.connected_components());
    }

    #[test]
    fn parseval_holds_for_random_signals(
        graph in labeled_graph_strategy(),
        raw in prop::collection::vec(-10.0f64..10.0, 16),
    ) {
        let n = graph.node_count();
        let x = Array1::from_iter(raw.into_iter().take(n));
        prop_assume!(x.len() == n);
        let sd = eigendecompose(&normalize(&graph)).unwrap();
        let spectrum = signal_spectrum(&sd, &x);
        let norm_sq = x.dot(&x);
        prop_assert!((spectrum.norm_sq() - norm_sq).abs() <= 1e-8 * norm_sq.max(1.0));
        if !spectrum.is_zero() {
            let probs = spectrum.probabilities().unwrap();
            prop_assert!((probs.sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn interaction_rows_stay_stochastic_and_symmetric(graph in labeled_graph_strategy()) {
        let ops = normalize(&graph);
        for im in interaction_sequence(&graph, &ops, 4) {
            let kc = graph.class_count();
            for l in 0..kc {
                prop_assert!((im.pi.row(l).sum() - 1.0).abs() <= 1e-10);
                for m in 0..kc {
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&im.pi[[l, m]]));
                    prop_assert!(
                        (im.pi_tilde[[l, m]] - im.pi_tilde[[m, l]]).abs() <= 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn horner_matches_naive_evaluation(
        coeffs in prop::collection::vec(-3.0f64..3.0, 1..7),
        lambda in 0.0f64..2.0,
    ) {
        let filter = PolynomialFilter::from_coefficients(coeffs.clone()).unwrap();
        let naive: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * lambda.powi(j as i32))
            .sum();
        prop_assert!((filter.evaluate(lambda) - naive).abs() <= 1e-10);
    }

    #[test]
    fn blend_stays_inside_the_range_hull(
        e1a in 0.0f64..1.0, m_a in 0.0f64..0.5,
        e1b in 0.0f64..1.0, m_b in 0.0f64..0.5,
        l1 in 0.01f64..0.99,
    ) {
        // Convex combinations of in-range first-order filters stay in
        // range, the closure the filter-bank search relies on.
        let a = PolynomialFilter::first_order(e1a, -m_a.min(e1a / 2.0));
        let b = PolynomialFilter::first_order(e1b, (1.0 - e1b) / 2.0 * m_b);
        let blend = a.blend(&b, l1);
        let (lo, hi) = blend.range_on_standard_interval();
        prop_assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12);
    }

    #[test]
    fn clamp_is_idempotent_and_bounded(x in -50.0f64..50.0) {
        let c = clamp(x);
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert_eq!(clamp(c), c);
        if (-1.0..=1.0).contains(&x) {
            prop_assert_eq!(c, x);
        }
    }

    #[test]
    fn eigensolver_reconstructs_random_symmetric_matrices(
        seed_vals in prop::collection::vec(-2.0f64..2.0, 36),
    ) {
        let n = 6;
        let mut m = Array2::<f64>::zeros((n, n));
        let mut it = seed_vals.into_iter();
        for i in 0..n {
            for j in 0..=i {
                let v = it.next().unwrap();
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        let eig = sym_eigen(&m).unwrap();
        for i in 0..n {
            for j in 0..n {
                let mut recon = 0.0;
                for k in 0..n {
                    recon += eig.vectors[[i, k]] * eig.values[k] * eig.vectors[[j, k]];
                }
                prop_assert!((recon - m[[i, j]]).abs() <= 1e-10);
            }
        }
    }
}
