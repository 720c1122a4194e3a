use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rgae::eval::{average_precision, classify_nodes, roc_auc, SplitSpec};
use rgae::graph::jaccard_consistency;
use rgae::synth::{expected_pairwise_jaccard, generate_detailed, SynthConfig};
use rgae::{NodeLabels, Tensor};

/// Standard normal draw by Box–Muller.
fn normal<R: Rng>(rng: &mut R) -> f64 {
    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
    let v: f64 = rng.gen();
    (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
}

#[test]
fn gaussian_blobs_are_classified() {
    // Equilateral triangle of side 3.
    let centers = [(0.0, 0.0), (3.0, 0.0), (1.5, 3.0 * 3f64.sqrt() / 2.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let per_class = 40;
    let mut classes = Vec::new();
    let mut features = Tensor::zeros(3 * per_class, 2);
    for (c, &(cx, cy)) in centers.iter().enumerate() {
        for k in 0..per_class {
            let row = c * per_class + k;
            features.set(row, 0, cx + 0.1 * normal(&mut rng));
            features.set(row, 1, cy + 0.1 * normal(&mut rng));
            classes.push(c);
        }
    }
    let labels = NodeLabels::from_classes(&classes);
    let scores = classify_nodes(&features, &labels, &SplitSpec::new(0.5, 3)).unwrap();
    assert!(scores.micro > 0.95, "accuracy {}", scores.micro);
}

#[test]
fn random_scores_rank_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let scores: Vec<f64> = (0..1000).map(|_| rng.gen()).collect();
    let labels: Vec<bool> = (0..1000).map(|i| i % 2 == 0).collect();
    let ap = average_precision(&scores, &labels).unwrap();
    let auc = roc_auc(&scores, &labels).unwrap();
    assert!((ap - 0.5).abs() < 0.1, "AP {ap}");
    assert!((auc - 0.5).abs() < 0.1, "AUC {auc}");
}

#[test]
fn synthetic_overlap_matches_expectation() {
    let cfg = SynthConfig::default();
    let synth = generate_detailed(&cfg).unwrap();
    let measured = jaccard_consistency(&synth.network).unwrap().get(0, 1);
    // Exact expectation from the generated backbone size.
    let backbone = synth.backbone.len() as f64;
    let unique = cfg.unique_frac * backbone;
    let expected = backbone / (backbone + 2.0 * unique);
    assert!((measured - expected).abs() <= 0.15, "{measured} vs {expected}");
    assert!((expected - expected_pairwise_jaccard(cfg.unique_frac)).abs() < 1e-12);
}
