use proptest::prelude::*;

use deepgraph::data::{generate_preferential_attachment, scale_label, temporal_split, verify_split, GrowthTarget, SplitSpec, SplitTimes};
use deepgraph::descriptor::{compute_hks, fit_stats, histogram_descriptor, DiffusionSteps};
use deepgraph::features::{extract_features, FEATURE_NAMES};
use deepgraph::graph::Graph;
use deepgraph::spectral::{eig_sym, normalized_laplacian};

fn graph() -> impl Strategy<Value = Graph> {
    (2usize..24).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..n * 3).prop_map(move |pairs| {
            let edges: Vec<_> = pairs.into_iter().filter(|(a, b)| a != b).collect();
            Graph::from_edges(n, edges).unwrap()
        })
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn laplacian_spectrum_in_range(g in graph()) {
        let dec = eig_sym(&normalized_laplacian(&g)).unwrap();
        let ev = dec.eigenvalues();
        prop_assert!(ev.iter().all(|&l| (-1e-9..=2.0 + 1e-9).contains(&l)));
        prop_assert!(ev.windows(2).all(|w| w[0] <= w[1]));
        // isolated nodes give zero rows, so zero counts every component
        prop_assert_eq!(ev.iter().filter(|l| l.abs() < 1e-8).count(), g.connected_components().len());
    }

    #[test]
    fn hks_is_positive_and_decreasing(g in graph()) {
        let h = compute_hks(&g, &DiffusionSteps::new(0.1, 20.0, 8).unwrap(), None).unwrap();
        for i in 0..h.rows() {
            let row = h.row(i);
            prop_assert!(row.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-12));
            prop_assert!(row.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }

    #[test]
    fn descriptor_columns_sum_to_one_and_ignore_labels(
        (g, perm) in graph().prop_flat_map(|g| { let n = g.node_count(); (Just(g), permutation(n)) })
    ) {
        let steps = DiffusionSteps::new(0.1, 20.0, 6).unwrap();
        let h = compute_hks(&g, &steps, None).unwrap();
        let stats = fit_stats([&h]).unwrap();
        let d = histogram_descriptor(&h, &stats, 7).unwrap();
        for s in 0..6 {
            let col: f64 = (0..7).map(|b| d.get(b, s)).sum();
            prop_assert!((col - 1.0).abs() < 1e-12);
        }
        let hp = compute_hks(&g.permute(&perm).unwrap(), &steps, None).unwrap();
        let dp = histogram_descriptor(&hp, &stats, 7).unwrap();
        for (a, b) in d.as_slice().iter().zip(dp.as_slice()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn features_ignore_labels(
        (g, perm) in graph().prop_flat_map(|g| { let n = g.node_count(); (Just(g), permutation(n)) })
    ) {
        let a = extract_features(&g, 1).to_vec();
        let b = extract_features(&g.permute(&perm).unwrap(), 1).to_vec();
        // community count comes from a randomized heuristic, everything else is exact
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            if FEATURE_NAMES[i] != "n_communities" {
                prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{}: {} vs {}", FEATURE_NAMES[i], x, y);
            }
        }
    }

    #[test]
    fn ego_nets_are_induced_and_contain_the_center(g in graph(), k in 0usize..3, c in 0usize..24) {
        let c = c % g.node_count();
        let ego = g.k_hop_ego_net(c, k).unwrap();
        let dist = g.bfs_distances(c, Some(k));
        let members = dist.iter().filter(|d| d.is_some()).count();
        prop_assert_eq!(ego.node_count(), members);
        let inside = g.edges().iter().filter(|(a, b)| dist[*a].is_some() && dist[*b].is_some()).count();
        prop_assert_eq!(ego.edge_count(), inside);
    }

    #[test]
    fn label_scaling_is_monotone(a in 0.0f64..1e6, b in 0.0f64..1e6) {
        prop_assert_eq!(a <= b, scale_label(a) <= scale_label(b));
        prop_assert_eq!(scale_label(0.0), 0.0);
    }

    #[test]
    fn generated_splits_are_ordered(seed in 0u64..1000, gap in 1.0f64..40.0) {
        let el = generate_preferential_attachment(150, 2, seed).unwrap();
        let spec = SplitSpec {
            fractions: [0.6, 0.2, 0.2],
            seed,
            train: SplitTimes { graph_time: 60.0, growth_time: 60.0 + gap },
            val: SplitTimes { graph_time: 61.0, growth_time: 61.0 + gap },
            test: SplitTimes { graph_time: 62.0, growth_time: 62.0 + gap },
        };
        let splits = temporal_split(&el, &spec, 1, GrowthTarget::Size).unwrap();
        verify_split(&splits).unwrap();
        prop_assert!(splits.train.iter().all(|i| i.raw_growth >= 0.0));
    }
}
