use ndarray::Array2;
use proptest::prelude::*;
use semlabel::graph_data::{generate_synthetic, make_folds, Dataset, Node, SynthConfig};
use semlabel::label_encoding::{decode_nearest, synth_hierarchical_table, LabelVocabulary};
use semlabel::sage_model::{forward_graph, init_model};
use semlabel::stats::{paired_t_test, shapiro_wilk, wilcoxon_signed_rank};

fn graph(n: usize, features: &[f64], dim: usize, edges: &[(usize, usize)], perm: &[usize]) -> Dataset {
    // node `i` of the original graph becomes node `perm[i]`
    let vocab = LabelVocabulary::new(vec!["a".into(), "b".into()]).unwrap();
    let mut nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: perm[i],
            features: features[i * dim..(i + 1) * dim].to_vec(),
            label_id: i % 2,
            project_id: 0,
        })
        .collect();
    nodes.sort_by_key(|n| n.id);
    let edges = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    Dataset::new(vec!["P".into()], vocab, nodes, edges).unwrap()
}

/// Node count, flat features, edges, a node permutation and a model seed.
type GraphInput = (usize, Vec<f64>, Vec<(usize, usize)>, Vec<usize>, u64);

fn graph_input() -> impl Strategy<Value = GraphInput> {
    (3usize..12).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|a| ((a + 1)..n).map(move |b| (a, b))).collect();
        (
            Just(n),
            prop::collection::vec(-2.0f64..2.0, n * 3),
            prop::sample::subsequence(pairs.clone(), 0..=pairs.len()),
            Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
            any::<u64>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relabeling_nodes_permutes_outputs((n, feats, edges, perm, seed) in graph_input()) {
        let identity: Vec<usize> = (0..n).collect();
        let a = graph(n, &feats, 3, &edges, &identity);
        let b = graph(n, &feats, 3, &edges, &perm);
        let model = init_model(3, 6, 4, seed).unwrap();
        let ya = forward_graph(&model, a.feature_matrix(), a.adjacency()).unwrap();
        let yb = forward_graph(&model, b.feature_matrix(), b.adjacency()).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            for k in 0..4 {
                let (u, v) = (ya.output()[[i, k]], yb.output()[[j, k]]);
                prop_assert!((u - v).abs() <= 1e-12 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn edge_order_does_not_matter((n, feats, edges, _perm, seed) in graph_input()) {
        let identity: Vec<usize> = (0..n).collect();
        let a = graph(n, &feats, 3, &edges, &identity);
        let mut rev: Vec<(usize, usize)> = edges.iter().rev().map(|&(x, y)| (y, x)).collect();
        let half = rev.len() / 2;
        rev.rotate_left(half);
        let b = graph(n, &feats, 3, &rev, &identity);
        let model = init_model(3, 5, 2, seed).unwrap();
        let ya = forward_graph(&model, a.feature_matrix(), a.adjacency()).unwrap();
        let yb = forward_graph(&model, b.feature_matrix(), b.adjacency()).unwrap();
        let diff = (ya.output() - yb.output()).iter().fold(0f64, |m, v| m.max(v.abs()));
        prop_assert!(diff <= 1e-12);
    }

    #[test]
    fn adjacency_is_symmetric((n, feats, edges, _perm, _seed) in graph_input()) {
        let identity: Vec<usize> = (0..n).collect();
        let ds = graph(n, &feats, 3, &edges, &identity);
        for (v, nbrs) in ds.adjacency().iter().enumerate() {
            for &u in nbrs {
                prop_assert!(u != v);
                prop_assert!(ds.adjacency()[u].contains(&v));
            }
        }
        let degree: usize = ds.adjacency().iter().map(Vec::len).sum();
        prop_assert_eq!(degree, 2 * edges.len());
    }

    #[test]
    fn folds_partition_nodes(n_projects in 2usize..6, per in 1usize..15, seed in any::<u64>()) {
        let ds = generate_synthetic(&SynthConfig {
            seed,
            n_projects,
            generic_types: 2,
            subtypes_per_type: 2,
            nodes_per_project: per,
            feature_dim: 8,
            ..SynthConfig::default()
        }).unwrap();
        let folds = make_folds(&ds).unwrap();
        prop_assert_eq!(folds.len(), n_projects);
        let mut seen = vec![0usize; ds.len()];
        for f in &folds {
            prop_assert_eq!(f.train_node_ids.len() + f.test_node_ids.len(), ds.len());
            for &v in &f.test_node_ids {
                prop_assert_eq!(ds.nodes()[v].project_id, f.test_project);
                seen[v] += 1;
            }
            prop_assert!(f.train_node_ids.iter().all(|&v| ds.nodes()[v].project_id != f.test_project));
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn decoding_ignores_positive_scale(row in 0usize..12, scale in 1e-6f64..1e6, seed in any::<u64>(),
                                       noise in prop::collection::vec(-0.05f64..0.05, 32)) {
        let vocab = LabelVocabulary::with_groups(
            (0..12).map(|i| format!("L{i}")).collect(),
            (0..12).map(|i| i / 4).collect(),
        ).unwrap();
        let t = synth_hierarchical_table(&vocab, 32, seed, 0.8).unwrap();
        let p: Vec<f64> = t.row(row).iter().zip(&noise).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = p.iter().map(|v| v * scale).collect();
        prop_assert_eq!(decode_nearest(&p, &t).unwrap(), decode_nearest(&scaled, &t).unwrap());
    }

    #[test]
    fn swapping_pairs_negates_statistics(x in prop::collection::vec(0.0f64..1.0, 5..40),
                                         shift in prop::collection::vec(-0.3f64..0.3, 40)) {
        let y: Vec<f64> = x.iter().zip(&shift).map(|(a, b)| a + b).collect();
        prop_assume!(x.iter().zip(&y).any(|(a, b)| a != b));
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        prop_assume!(d.iter().any(|v| (v - d[0]).abs() > 1e-9));
        let (t1, t2) = (paired_t_test(&x, &y).unwrap(), paired_t_test(&y, &x).unwrap());
        prop_assert!((t1.statistic + t2.statistic).abs() < 1e-9);
        prop_assert!((t1.p_value - t2.p_value).abs() < 1e-12);
        let (w1, w2) = (wilcoxon_signed_rank(&x, &y).unwrap(), wilcoxon_signed_rank(&y, &x).unwrap());
        prop_assert!((w1.statistic + w2.statistic).abs() < 1e-9);
        prop_assert!((w1.p_value - w2.p_value).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&w1.p_value));
    }

    #[test]
    fn shapiro_is_affine_invariant(x in prop::collection::vec(-5.0f64..5.0, 3..60),
                                   a in 0.1f64..10.0, b in -100.0f64..100.0) {
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let r = shapiro_wilk(&x).unwrap();
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let s = shapiro_wilk(&y).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.statistic));
        prop_assert!((r.statistic - s.statistic).abs() < 1e-9);
        prop_assert!((r.p_value - s.p_value).abs() < 1e-8);
    }
}

#[test]
fn isolated_node_sees_zero_neighbor_mean() {
    let vocab = LabelVocabulary::new(vec!["a".into()]).unwrap();
    let nodes = (0..3)
        .map(|id| Node { id, features: vec![id as f64 + 1.0, -1.0], label_id: 0, project_id: 0 })
        .collect();
    let ds = Dataset::new(vec!["P".into()], vocab, nodes, vec![(0, 1)]).unwrap();
    let model = init_model(2, 3, 2, 9).unwrap();
    let full = forward_graph(&model, ds.feature_matrix(), ds.adjacency()).unwrap();
    let alone = Array2::from_shape_vec((1, 2), vec![3.0, -1.0]).unwrap();
    let solo = forward_graph(&model, &alone, &[vec![]]).unwrap();
    assert_eq!(full.output().row(2), solo.output().row(0));
}
