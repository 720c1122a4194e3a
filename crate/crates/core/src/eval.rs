//! Downstream evaluation of embeddings.
//!
//! Node classification trains one-vs-rest logistic classifiers on a random
//! split of the labelled nodes and reports Micro/Macro-F1. Link prediction
//! holds out one view, pairs its edges with an equal number of sampled
//! non-edges, uses the cosine similarity of the two endpoint embeddings as
//! the only feature, and reports ROC-AUC and average precision.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{MultiViewNetwork, NodeLabels, SparseAdjacency};
use crate::tensor::{dot, Tensor};

pub const LOGISTIC_L2: f64 = 1e-4;
pub const LOGISTIC_ITERATIONS: usize = 500;
/// Decision threshold for multi-label prediction.
pub const MULTILABEL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no class has training examples")]
    DegenerateClass,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("insufficient nodes: {0}")]
    InsufficientNodes(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("network has no labels")]
    NoLabels,
    #[error("invalid task: {0}")]
    InvalidTask(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_ratio: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train_ratio: f64, seed: u64) -> Self {
        Self {
            train_ratio,
            seed,
            stratified: true,
        }
    }
}

/// Random train/test partition of `0..n`, both halves sorted.
///
/// With `strata` given and `spec.stratified` set, every stratum contributes
/// `round(len · ratio)` training items, so class proportions hold to within
/// one item.
pub fn make_split(n: usize, spec: &SplitSpec, strata: Option<&[usize]>) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_ratio > 0.0 && spec.train_ratio < 1.0) {
        return Err(EvalError::InvalidSplit(format!(
            "train ratio must lie in (0, 1), got {}",
            spec.train_ratio
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    match strata {
        Some(strata) if spec.stratified => {
            if strata.len() != n {
                return Err(EvalError::LengthMismatch {
                    left: n,
                    right: strata.len(),
                });
            }
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, &s) in strata.iter().enumerate() {
                groups.entry(s).or_default().push(i);
            }
            for (_, mut members) in groups {
                members.shuffle(&mut rng);
                let k = (members.len() as f64 * spec.train_ratio).round() as usize;
                train.extend_from_slice(&members[..k]);
                test.extend_from_slice(&members[k..]);
            }
        }
        _ => {
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            let k = (n as f64 * spec.train_ratio).round() as usize;
            train.extend_from_slice(&all[..k.min(n)]);
            test.extend_from_slice(&all[k.min(n)..]);
        }
    }
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::InsufficientNodes(format!(
            "{n} items at ratio {} leave an empty side",
            spec.train_ratio
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// One-vs-rest logistic regression fit by full-batch gradient descent.
///
/// Features are standardized with training statistics. Each class minimizes
/// the mean log-loss plus `LOGISTIC_L2 / 2 · ‖w‖²` (bias unpenalized) for
/// [`LOGISTIC_ITERATIONS`] steps of size `1 / L`, where `L` bounds the
/// gradient's Lipschitz constant.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticOvr {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
    /// Per class: feature weights followed by the bias. `None` for classes
    /// that had no positive training example.
    classes: Vec<Option<Vec<f64>>>,
}

pub fn logistic_ovr_train(
    features: &Tensor,
    labels: &[Vec<usize>],
    train: &[usize],
    n_classes: usize,
) -> Result<LogisticOvr> {
    if features.rows() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: features.rows(),
            right: labels.len(),
        });
    }
    if train.is_empty() {
        return Err(EvalError::InsufficientNodes("empty training set".into()));
    }
    let p = features.cols();
    let m = train.len() as f64;

    let mut mean = vec![0.0; p];
    for &i in train {
        for (acc, x) in mean.iter_mut().zip(features.row(i)) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= m);
    let mut var = vec![0.0; p];
    for &i in train {
        for ((acc, x), mu) in var.iter_mut().zip(features.row(i)).zip(&mean) {
            *acc += (x - mu) * (x - mu);
        }
    }
    let inv_std: Vec<f64> = var
        .iter()
        .map(|v| {
            let sd = (v / m).sqrt();
            if sd > 1e-12 {
                1.0 / sd
            } else {
                0.0
            }
        })
        .collect();

    // Standardized design matrix with a trailing bias column.
    let design: Vec<Vec<f64>> = train
        .iter()
        .map(|&i| {
            let mut row: Vec<f64> = features
                .row(i)
                .iter()
                .zip(&mean)
                .zip(&inv_std)
                .map(|((x, mu), s)| (x - mu) * s)
                .collect();
            row.push(1.0);
            row
        })
        .collect();
    let step = 1.0 / (0.25 * top_eigenvalue(&design, p + 1) + LOGISTIC_L2);

    let mut classes = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let targets: Vec<f64> = train
            .iter()
            .map(|&i| if labels[i].contains(&c) { 1.0 } else { 0.0 })
            .collect();
        if !targets.contains(&1.0) {
            log::warn!("class {c} has no training examples; it will never be predicted");
            classes.push(None);
            continue;
        }
        let mut w = vec![0.0; p + 1];
        let mut grad = vec![0.0; p + 1];
        for _ in 0..LOGISTIC_ITERATIONS {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for (row, &t) in design.iter().zip(&targets) {
                let err = sigmoid(dot(row, &w)) - t;
                for (g, x) in grad.iter_mut().zip(row) {
                    *g += err * x;
                }
            }
            for (j, (wj, g)) in w.iter_mut().zip(&grad).enumerate() {
                let reg = if j < p { LOGISTIC_L2 * *wj } else { 0.0 };
                *wj -= step * (g / m + reg);
            }
        }
        classes.push(Some(w));
    }
    if classes.iter().all(Option::is_none) {
        return Err(EvalError::DegenerateClass);
    }
    Ok(LogisticOvr {
        mean,
        inv_std,
        classes,
    })
}

/// Largest eigenvalue of `XᵀX / m` by power iteration.
fn top_eigenvalue(design: &[Vec<f64>], dim: usize) -> f64 {
    let m = design.len() as f64;
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut lambda = 1.0;
    for _ in 0..50 {
        let mut next = vec![0.0; dim];
        for row in design {
            let s = dot(row, &v);
            for (n, x) in next.iter_mut().zip(row) {
                *n += s * x / m;
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        v = next.into_iter().map(|x| x / norm).collect();
    }
    lambda.max(1e-12)
}

impl LogisticOvr {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Per-class probabilities; classes without a model score 0.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = row
            .iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((x, mu), s)| (x - mu) * s)
            .chain(std::iter::once(1.0))
            .collect();
        self.classes
            .iter()
            .map(|w| w.as_ref().map_or(0.0, |w| sigmoid(dot(&x, w))))
            .collect()
    }

    /// Highest-scoring class; ties resolve to the lowest index.
    pub fn predict_class(&self, row: &[f64]) -> usize {
        let scores = self.scores(row);
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        best
    }

    /// Every class scoring at least [`MULTILABEL_THRESHOLD`].
    pub fn predict_labels(&self, row: &[f64]) -> Vec<usize> {
        self.scores(row)
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= MULTILABEL_THRESHOLD)
            .map(|(c, _)| c)
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    crate::tape::sigmoid(x)
}

/// Micro- and Macro-F1 over label sets.
///
/// Micro-F1 pools TP/FP/FN over all classes. Macro-F1 averages per-class F1
/// over the classes that occur in `truth`; a class with TP = 0 but some
/// FP or FN scores 0.
pub fn micro_macro_f1(pred: &[Vec<usize>], truth: &[Vec<usize>], n_classes: usize) -> Result<(f64, f64)> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fun = vec![0usize; n_classes];
    for (p, t) in pred.iter().zip(truth) {
        for &c in p {
            if c >= n_classes {
                return Err(EvalError::InvalidTask(format!("class {c} out of range")));
            }
            if t.contains(&c) {
                tp[c] += 1;
            } else {
                fp[c] += 1;
            }
        }
        for &c in t {
            if c >= n_classes {
                return Err(EvalError::InvalidTask(format!("class {c} out of range")));
            }
            if !p.contains(&c) {
                fun[c] += 1;
            }
        }
    }
    let f1 = |tp: usize, fp: usize, fun: usize| {
        let denom = 2 * tp + fp + fun;
        if denom == 0 {
            0.0
        } else {
            2.0 * tp as f64 / denom as f64
        }
    };
    let micro = f1(tp.iter().sum(), fp.iter().sum(), fun.iter().sum());
    let present: Vec<usize> = (0..n_classes).filter(|&c| tp[c] + fun[c] > 0).collect();
    let macro_f1 = if present.is_empty() {
        0.0
    } else {
        present.iter().map(|&c| f1(tp[c], fp[c], fun[c])).sum::<f64>() / present.len() as f64
    };
    Ok((micro, macro_f1))
}

/// ROC-AUC as the Mann-Whitney statistic; tied positive/negative pairs count
/// one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::InvalidTask("AUC needs both positives and negatives".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Average ranks over tie groups.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

/// Mean precision at the rank of each positive, scanning scores from high
/// to low. Tied scores are treated as one threshold.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 {
        return Err(EvalError::InvalidTask("AP needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut seen, mut hits, mut ap) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let group_hits = order[i..=j].iter().filter(|&&k| labels[k]).count();
        seen += j - i + 1;
        hits += group_hits;
        ap += group_hits as f64 * hits as f64 / seen as f64;
        i = j + 1;
    }
    Ok(ap / n_pos as f64)
}

/// Cosine similarity, `None` if either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot(a, b) / (na * nb))
    }
}

/// Held-out edges of one view with an equal number of non-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPredTask {
    pub target_view: usize,
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl LinkPredTask {
    /// Every edge of `target_view` plus as many sampled non-edges.
    pub fn build(net: &MultiViewNetwork, target_view: usize, seed: u64) -> Result<Self> {
        if target_view >= net.num_views() {
            return Err(EvalError::InvalidTask(format!(
                "target view {target_view} of {}",
                net.num_views()
            )));
        }
        let view = net.view(target_view);
        let positives: Vec<(usize, usize)> = view.edges().map(|(u, v, _)| (u, v)).collect();
        let negatives = sample_negatives(view, positives.len(), seed)?;
        Ok(Self {
            target_view,
            positives,
            negatives,
        })
    }

    /// Control task: the same pairs with positive/negative roles reassigned
    /// at random. A sound pipeline scores it near AUC 0.5.
    pub fn shuffled_control(&self, seed: u64) -> Self {
        let mut pairs: Vec<(usize, usize)> = self.positives.iter().chain(&self.negatives).copied().collect();
        pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let negatives = pairs.split_off(self.positives.len());
        Self {
            target_view: self.target_view,
            positives: pairs,
            negatives,
        }
    }

    /// All pairs with their labels, positives first.
    pub fn labelled_pairs(&self) -> (Vec<(usize, usize)>, Vec<bool>) {
        let pairs = self.positives.iter().chain(&self.negatives).copied().collect();
        let labels = std::iter::repeat_n(true, self.positives.len())
            .chain(std::iter::repeat_n(false, self.negatives.len()))
            .collect();
        (pairs, labels)
    }
}

/// `count` distinct unordered non-adjacent pairs `(u, v)`, `u < v`.
pub fn sample_negatives(view: &SparseAdjacency, count: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    let n = view.n();
    let total_pairs = n * n.saturating_sub(1) / 2;
    let available = total_pairs - view.edge_count();
    if count > available {
        return Err(EvalError::InsufficientNodes(format!(
            "{count} negatives requested but only {available} non-edges exist"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if 2 * count > available {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !view.has_edge(u, v))
            .collect();
        all.shuffle(&mut rng);
        all.truncate(count);
        return Ok(all);
    }
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if view.has_edge(pair.0, pair.1) || !chosen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkScores {
    pub roc_auc: f64,
    pub average_precision: f64,
}

/// Cosine features, logistic fit on the training pairs, metrics on the rest.
pub fn link_predict(embeddings: &Tensor, task: &LinkPredTask, split: &SplitSpec) -> Result<LinkScores> {
    let (pairs, labels) = task.labelled_pairs();
    if let Some(&(u, v)) = pairs.iter().find(|&&(u, v)| u.max(v) >= embeddings.rows()) {
        return Err(EvalError::InvalidTask(format!(
            "pair ({u}, {v}) outside {} embedded nodes",
            embeddings.rows()
        )));
    }
    let mut zero_pairs = 0usize;
    let features = Tensor::from_fn(pairs.len(), 1, |k, _| {
        let (u, v) = pairs[k];
        cosine(embeddings.row(u), embeddings.row(v)).unwrap_or_else(|| {
            zero_pairs += 1;
            0.0
        })
    });
    if zero_pairs > 0 {
        log::warn!("{zero_pairs} pairs touch a zero embedding; cosine set to 0");
    }
    let strata: Vec<usize> = labels.iter().map(|&l| usize::from(l)).collect();
    let (train, test) = make_split(pairs.len(), split, Some(&strata))?;
    let targets: Vec<Vec<usize>> = labels.iter().map(|&l| if l { vec![0] } else { vec![] }).collect();
    let model = logistic_ovr_train(&features, &targets, &train, 1)?;
    let scores: Vec<f64> = test.iter().map(|&k| model.scores(features.row(k))[0]).collect();
    let test_labels: Vec<bool> = test.iter().map(|&k| labels[k]).collect();
    Ok(LinkScores {
        roc_auc: roc_auc(&scores, &test_labels)?,
        average_precision: average_precision(&scores, &test_labels)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Scores {
    pub micro: f64,
    pub macro_f1: f64,
}

/// Node classification on one split of the labelled nodes. Multi-class
/// labels are predicted by argmax, multi-label ones by thresholding.
pub fn classify_nodes(embeddings: &Tensor, labels: &NodeLabels, split: &SplitSpec) -> Result<F1Scores> {
    if embeddings.rows() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: embeddings.rows(),
            right: labels.len(),
        });
    }
    let labelled: Vec<usize> = (0..labels.len()).filter(|&i| !labels.of(i).is_empty()).collect();
    let strata: Vec<usize> = labelled.iter().map(|&i| labels.of(i)[0]).collect();
    let (train_pos, test_pos) = make_split(labelled.len(), split, Some(&strata))?;
    let train: Vec<usize> = train_pos.iter().map(|&k| labelled[k]).collect();
    let test: Vec<usize> = test_pos.iter().map(|&k| labelled[k]).collect();
    let model = logistic_ovr_train(embeddings, labels.assignments(), &train, labels.num_classes())?;
    let pred: Vec<Vec<usize>> = test
        .iter()
        .map(|&i| {
            let row = embeddings.row(i);
            if labels.is_multi_label() {
                model.predict_labels(row)
            } else {
                vec![model.predict_class(row)]
            }
        })
        .collect();
    let truth: Vec<Vec<usize>> = test.iter().map(|&i| labels.of(i).to_vec()).collect();
    let (micro, macro_f1) = micro_macro_f1(&pred, &truth, labels.num_classes())?;
    Ok(F1Scores { micro, macro_f1 })
}

/// One line of the metrics report.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub task: String,
    pub train_ratio: f64,
    /// Repetition seed, or `mean` for the average over seeds.
    pub seed: String,
    pub metric: String,
    pub value: f64,
}

impl MetricRow {
    pub const HEADER: &'static str = "task\ttrain_ratio\tseed\tmetric\tvalue";
}

impl fmt::Display for MetricRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{:.17e}",
            self.task, self.train_ratio, self.seed, self.metric, self.value
        )
    }
}

pub fn write_report<W: Write + ?Sized>(out: &mut W, rows: &[MetricRow]) -> io::Result<()> {
    writeln!(out, "{}", MetricRow::HEADER)?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Parses a report written by [`write_report`].
pub fn parse_report(text: &str) -> std::result::Result<Vec<MetricRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(MetricRow::HEADER) {
        return Err("missing report header".into());
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                return Err(format!("line {}: expected 5 fields", i + 2));
            }
            Ok(MetricRow {
                task: f[0].to_owned(),
                train_ratio: f[1].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
                seed: f[2].to_owned(),
                metric: f[3].to_owned(),
                value: f[4].parse().map_err(|e| format!("line {}: {e}", i + 2))?,
            })
        })
        .collect()
}

fn push_with_means(rows: &mut Vec<MetricRow>, task: &str, ratio: f64, per_seed: &[(u64, Vec<(&str, f64)>)]) {
    for (seed, metrics) in per_seed {
        for &(metric, value) in metrics {
            rows.push(MetricRow {
                task: task.into(),
                train_ratio: ratio,
                seed: seed.to_string(),
                metric: metric.into(),
                value,
            });
        }
    }
    if let Some((_, first)) = per_seed.first() {
        for (k, &(metric, _)) in first.iter().enumerate() {
            let mean = per_seed.iter().map(|(_, m)| m[k].1).sum::<f64>() / per_seed.len() as f64;
            rows.push(MetricRow {
                task: task.into(),
                train_ratio: ratio,
                seed: "mean".into(),
                metric: metric.into(),
                value: mean,
            });
        }
    }
}

/// Micro/Macro-F1 rows for every ratio and seed, followed by per-ratio means.
pub fn node_classification_report(
    embeddings: &Tensor,
    labels: &NodeLabels,
    ratios: &[f64],
    seeds: &[u64],
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for &ratio in ratios {
        let per_seed = seeds
            .iter()
            .map(|&seed| {
                let s = classify_nodes(embeddings, labels, &SplitSpec::new(ratio, seed))?;
                Ok((seed, vec![("micro_f1", s.micro), ("macro_f1", s.macro_f1)]))
            })
            .collect::<Result<Vec<_>>>()?;
        push_with_means(&mut rows, "node_classification", ratio, &per_seed);
    }
    Ok(rows)
}

/// ROC-AUC/AP rows for every ratio and seed. Negatives are resampled per
/// seed.
pub fn link_prediction_report(
    embeddings: &Tensor,
    net: &MultiViewNetwork,
    target_view: usize,
    ratios: &[f64],
    seeds: &[u64],
) -> Result<Vec<MetricRow>> {
    let mut rows = Vec::new();
    for &ratio in ratios {
        let per_seed = seeds
            .iter()
            .map(|&seed| {
                let task = LinkPredTask::build(net, target_view, seed)?;
                let s = link_predict(embeddings, &task, &SplitSpec::new(ratio, seed))?;
                Ok((seed, vec![("roc_auc", s.roc_auc), ("average_precision", s.average_precision)]))
            })
            .collect::<Result<Vec<_>>>()?;
        push_with_means(&mut rows, "link_prediction", ratio, &per_seed);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_split_sizes() {
        let (train, test) = make_split(10, &SplitSpec { train_ratio: 0.5, seed: 3, stratified: false }, None).unwrap();
        assert_eq!(train.len(), 5);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_split_keeps_proportions() {
        let strata = [0, 0, 0, 0, 0, 0, 1, 1, 1, 1];
        let (train, _) = make_split(10, &SplitSpec::new(0.5, 11), Some(&strata)).unwrap();
        let ones = train.iter().filter(|&&i| strata[i] == 1).count();
        assert_eq!((train.len() - ones, ones), (3, 2));
    }

    #[test]
    fn split_errors() {
        assert!(matches!(
            make_split(10, &SplitSpec::new(1.0, 0), None),
            Err(EvalError::InvalidSplit(_))
        ));
        assert!(matches!(
            make_split(1, &SplitSpec { train_ratio: 0.5, seed: 0, stratified: false }, None),
            Err(EvalError::InsufficientNodes(_))
        ));
    }

    #[test]
    fn split_is_seed_deterministic() {
        let spec = SplitSpec { train_ratio: 0.3, seed: 5, stratified: false };
        assert_eq!(make_split(40, &spec, None).unwrap(), make_split(40, &spec, None).unwrap());
    }

    #[test]
    fn separable_one_dimensional_data() {
        let features = Tensor::from_rows(&[&[-1.0], &[1.0], &[-1.0], &[1.0]]);
        let labels = vec![vec![0], vec![1], vec![0], vec![1]];
        let model = logistic_ovr_train(&features, &labels, &[0, 1], 2).unwrap();
        assert_eq!(model.predict_class(&[-1.0]), 0);
        assert_eq!(model.predict_class(&[1.0]), 1);
    }

    #[test]
    fn identical_features_predict_majority() {
        let features = Tensor::filled(6, 2, 0.7);
        let labels = vec![vec![1], vec![1], vec![0], vec![1], vec![2], vec![1]];
        let model = logistic_ovr_train(&features, &labels, &[0, 1, 2, 3, 4], 3).unwrap();
        assert_eq!(model.predict_class(&[0.7, 0.7]), 1);
    }

    #[test]
    fn class_without_examples_is_skipped() {
        let features = Tensor::from_rows(&[&[0.0], &[1.0]]);
        let labels = vec![vec![0], vec![1]];
        let model = logistic_ovr_train(&features, &labels, &[0], 2).unwrap();
        assert_eq!(model.scores(&[1.0])[1], 0.0);
        let none = vec![vec![], vec![]];
        assert!(matches!(
            logistic_ovr_train(&features, &none, &[0, 1], 2),
            Err(EvalError::DegenerateClass)
        ));
    }

    #[test]
    fn f1_examples() {
        let truth = vec![vec![0], vec![1], vec![2]];
        assert_eq!(micro_macro_f1(&truth, &truth, 3).unwrap(), (1.0, 1.0));

        let (micro, macro_f1) = micro_macro_f1(&[vec![0], vec![0]], &[vec![0], vec![1]], 2).unwrap();
        assert!((micro - 0.5).abs() < 1e-15);
        assert!((macro_f1 - 1.0 / 3.0).abs() < 1e-15);

        let wrong = vec![vec![1], vec![2], vec![0]];
        assert_eq!(micro_macro_f1(&wrong, &truth, 3).unwrap(), (0.0, 0.0));

        assert!(matches!(
            micro_macro_f1(&[vec![0]], &truth, 3),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn micro_f1_is_accuracy_for_single_label() {
        let truth = vec![vec![0], vec![1], vec![2], vec![1], vec![0]];
        let pred = vec![vec![0], vec![2], vec![2], vec![1], vec![1]];
        let (micro, _) = micro_macro_f1(&pred, &truth, 3).unwrap();
        assert!((micro - 3.0 / 5.0).abs() < 1e-15);
    }

    #[test]
    fn ranking_metric_examples() {
        let labels = [true, true, false, false];
        let perfect = [0.9, 0.9, 0.1, 0.1];
        assert_eq!(roc_auc(&perfect, &labels).unwrap(), 1.0);
        assert_eq!(average_precision(&perfect, &labels).unwrap(), 1.0);

        assert_eq!(roc_auc(&[0.3; 4], &labels).unwrap(), 0.5);

        let scores = [0.8, 0.6, 0.4, 0.2];
        let labels = [true, false, true, false];
        assert!((roc_auc(&scores, &labels).unwrap() - 0.75).abs() < 1e-15);
        assert!((average_precision(&scores, &labels).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn cosine_of_zero_vector_is_undefined() {
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), None);
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negatives_are_non_edges() {
        let pairs: Vec<(usize, usize)> = (0..20).map(|i| (i, (i + 1) % 20)).collect();
        let view = SparseAdjacency::from_pairs(20, &pairs).unwrap();
        let neg = sample_negatives(&view, 20, 4).unwrap();
        assert_eq!(neg.len(), 20);
        let unique: HashSet<_> = neg.iter().collect();
        assert_eq!(unique.len(), 20);
        for &(u, v) in &neg {
            assert!(u < v && !view.has_edge(u, v));
        }
        assert_eq!(neg, sample_negatives(&view, 20, 4).unwrap());
    }

    #[test]
    fn too_few_non_edges() {
        // K4 minus one edge: a single non-edge remains.
        let view = SparseAdjacency::from_pairs(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        assert_eq!(sample_negatives(&view, 1, 0).unwrap(), vec![(2, 3)]);
        assert!(matches!(
            sample_negatives(&view, 2, 0),
            Err(EvalError::InsufficientNodes(_))
        ));
    }

    #[test]
    fn report_round_trip() {
        let rows = vec![MetricRow {
            task: "node_classification".into(),
            train_ratio: 0.3,
            seed: "4".into(),
            metric: "micro_f1".into(),
            value: 0.123456789,
        }];
        let mut buf = Vec::new();
        write_report(&mut buf, &rows).unwrap();
        assert_eq!(parse_report(std::str::from_utf8(&buf).unwrap()).unwrap(), rows);
    }
}
