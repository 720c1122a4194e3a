mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::*;
use rgae::embeddings::EmbeddingFile;
use rgae::eval::{average_precision, make_split, micro_macro_f1, roc_auc, SplitSpec};
use rgae::graph::{jaccard_consistency, load_edge_lists, normalize, spmm, write_edge_list};
use rgae::model::{consistent_embedding, ParamVars, PreparedNetwork};
use rgae::trainer::update_lambda;
use rgae::{SparseAdjacency, Tape, Tensor};

fn edge_set(n: usize) -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..n, 0..n), 0..3 * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_adjacency_is_symmetric_with_positive_diagonal(n in 2usize..12, pairs in edge_set(12)) {
        let pairs: Vec<_> = pairs.into_iter().filter(|&(u, v)| u < n && v < n).collect();
        let adj = SparseAdjacency::from_pairs(n, &pairs).unwrap();
        prop_assert!(adj.is_symmetric());
        let s = normalize(&adj).unwrap().to_dense();
        for i in 0..n {
            prop_assert!(s.get(i, i) > 0.0);
            for j in 0..n {
                prop_assert!((s.get(i, j) - s.get(j, i)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sparse_product_matches_dense(n in 2usize..10, pairs in edge_set(10), seed in any::<u64>()) {
        let pairs: Vec<_> = pairs.into_iter().filter(|&(u, v)| u < n && v < n).collect();
        let adj = SparseAdjacency::from_pairs(n, &pairs).unwrap();
        let norm = normalize(&adj).unwrap();
        let x = random_tensor(n, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let dense = norm.to_dense().matmul(&x).unwrap();
        prop_assert!(spmm(&norm, &x).unwrap().max_abs_diff(&dense).unwrap() < 1e-12);
    }

    #[test]
    fn view_weights_stay_on_the_simplex(
        b in prop::collection::vec(0.0f64..1e3, 1..6),
        gamma in prop_oneof![0.01f64..0.99, 1.01f64..200.0],
    ) {
        let lambda = update_lambda(&b, gamma).unwrap();
        prop_assert!(lambda.iter().all(|l| (0.0..=1.0).contains(l)));
        prop_assert!((lambda.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_and_ap_ignore_monotone_rescaling(
        scores in prop::collection::vec(-5.0f64..5.0, 4..40),
        flips in prop::collection::vec(any::<bool>(), 40),
    ) {
        let mut labels: Vec<bool> = flips[..scores.len()].to_vec();
        labels[0] = true;
        labels[1] = false;
        let mapped: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 3.0).collect();
        prop_assert!((roc_auc(&scores, &labels).unwrap() - roc_auc(&mapped, &labels).unwrap()).abs() < 1e-12);
        prop_assert!(
            (average_precision(&scores, &labels).unwrap() - average_precision(&mapped, &labels).unwrap()).abs() < 1e-12
        );
    }

    #[test]
    fn micro_f1_equals_accuracy_for_single_labels(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..50),
    ) {
        let pred: Vec<Vec<usize>> = pairs.iter().map(|p| vec![p.0]).collect();
        let truth: Vec<Vec<usize>> = pairs.iter().map(|p| vec![p.1]).collect();
        let accuracy = pairs.iter().filter(|p| p.0 == p.1).count() as f64 / pairs.len() as f64;
        let (micro, _) = micro_macro_f1(&pred, &truth, 4).unwrap();
        prop_assert!((micro - accuracy).abs() < 1e-12);
    }

    #[test]
    fn jaccard_is_symmetric_and_bounded(views in 2usize..5, p in 0.05f64..0.6, seed in any::<u64>()) {
        let net = random_network(12, views, p, seed);
        let j = jaccard_consistency(&net).unwrap();
        for a in 0..views {
            prop_assert_eq!(j.get(a, a), 1.0);
            for b in 0..views {
                prop_assert_eq!(j.get(a, b), j.get(b, a));
                prop_assert!((0.0..=1.0).contains(&j.get(a, b)));
            }
        }
    }

    #[test]
    fn consensus_commutes_with_view_order(seed in any::<u64>(), gamma in 1.5f64..8.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared: Vec<Tensor> = (0..3).map(|_| random_tensor(5, 2, &mut rng)).collect();
        let lambda = random_lambda(3, seed);
        let con = consistent_embedding(&shared, &lambda, gamma).unwrap();
        let order = [2, 0, 1];
        let shared_p: Vec<Tensor> = order.iter().map(|&i| shared[i].clone()).collect();
        let lambda_p: Vec<f64> = order.iter().map(|&i| lambda[i]).collect();
        let con_p = consistent_embedding(&shared_p, &lambda_p, gamma).unwrap();
        prop_assert!(con.max_abs_diff(&con_p).unwrap() < 1e-14);
    }

    #[test]
    fn consensus_loss_scales_quadratically(seed in any::<u64>(), c in 0.1f64..4.0) {
        // Scaling every shared output by c scales the consensus term by c².
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared: Vec<Tensor> = (0..2).map(|_| random_tensor(6, 3, &mut rng)).collect();
        let lambda = random_lambda(2, seed ^ 1);
        let loss = |ys: &[Tensor]| {
            let con = dense_consistent(ys, &lambda, 3.0);
            dense_similarity(ys, &con, &lambda, 3.0)
        };
        let scaled: Vec<Tensor> = shared.iter().map(|y| y.scale(c)).collect();
        prop_assert!(relative_error(loss(&scaled), c * c * loss(&shared)) < 1e-12);
    }

    #[test]
    fn tape_consensus_term_matches_dense(seed in 0u64..1000) {
        let net = random_network(7, 2, 0.4, seed);
        let prepared = PreparedNetwork::new(&net).unwrap();
        let (_, params) = random_params(7, &[4, 3], 2, seed + 1);
        let lambda = random_lambda(2, seed + 2);
        let mut tape = Tape::new();
        let vars = ParamVars::register_frozen(&mut tape, &params).unwrap();
        let mut shared_vars = Vec::new();
        let mut shared = Vec::new();
        for i in 0..2 {
            let (s, _) = rgae::model::encode_view(&mut tape, prepared.view(i), &vars, i).unwrap();
            shared_vars.push(s);
            shared.push(tape.value(s).clone());
        }
        let con = rgae::model::consistent_embedding_var(&mut tape, &shared_vars, &lambda, 2.0).unwrap();
        let sim = rgae::model::similarity_loss(&mut tape, &shared_vars, con, &lambda, 2.0).unwrap();
        let want = dense_similarity(&shared, &dense_consistent(&shared, &lambda, 2.0), &lambda, 2.0);
        prop_assert!(relative_error(tape.scalar(sim).unwrap(), want) < 1e-12);
    }

    #[test]
    fn edge_list_round_trip(n in 2usize..15, pairs in edge_set(15)) {
        let pairs: Vec<_> = pairs.into_iter().filter(|&(u, v)| u < n && v < n && u != v).collect();
        prop_assume!(!pairs.is_empty());
        let adj = SparseAdjacency::from_pairs(n, &pairs).unwrap();
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("view.edges");
        let mut buf = Vec::new();
        write_edge_list(&mut buf, &adj, &names).unwrap();
        std::fs::write(&path, buf).unwrap();
        let back = load_edge_lists(&[&path], None).unwrap();
        let back_names = back.node_names();
        let view = back.view(0);
        prop_assert_eq!(view.edge_count(), adj.edge_count());
        for (u, v, _) in view.edges() {
            let (a, b) = (back_names[u][1..].parse::<usize>().unwrap(), back_names[v][1..].parse::<usize>().unwrap());
            prop_assert!(adj.has_edge(a, b));
        }
    }

    #[test]
    fn embedding_file_round_trip_is_exact(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Tensor::from_fn(n, 6, |_, _| rand::Rng::gen_range(&mut rng, -1e6..1e6) * 1e-7);
        let names: Vec<String> = (0..n).map(|i| format!("node{i}")).collect();
        let file = EmbeddingFile::new(names, m, 2, 2).unwrap();
        let mut buf = Vec::new();
        file.write_to(&mut buf).unwrap();
        let back = EmbeddingFile::parse(std::str::from_utf8(&buf).unwrap(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, file);
    }

    #[test]
    fn splits_partition_and_repeat(
        classes in prop::collection::vec(0usize..3, 4..60),
        ratio in 0.1f64..0.9,
        seed in any::<u64>(),
    ) {
        let spec = SplitSpec::new(ratio, seed);
        let mut sizes = [0usize; 3];
        for &c in &classes {
            sizes[c] += 1;
        }
        let n_train: usize = sizes.iter().map(|&s| (s as f64 * ratio).round() as usize).sum();
        let result = make_split(classes.len(), &spec, Some(&classes));
        if n_train == 0 || n_train == classes.len() {
            prop_assert!(result.is_err());
            return Ok(());
        }
        let (train, test) = result.unwrap();
        prop_assert_eq!(train.len(), n_train);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..classes.len()).collect::<Vec<_>>());
        prop_assert_eq!(make_split(classes.len(), &spec, Some(&classes)).unwrap(), (train, test));
    }
}
