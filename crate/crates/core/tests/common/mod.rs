//! Helpers shared by the integration tests: random instances and a dense,
//! tape-free re-implementation of the model used as an oracle.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rgae::model::{LayerSpec, LossWeights, ParamVars, PreparedNetwork, RgaeParams};
use rgae::{MultiViewNetwork, SparseAdjacency, Tape, Tensor};

pub const BCE_EPS: f64 = 1e-12;

/// Erdős–Rényi views over `n` nodes. Every view gets at least one edge.
pub fn random_network(n: usize, views: usize, p: f64, seed: u64) -> MultiViewNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let adjs = (0..views)
        .map(|_| {
            let mut pairs = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen::<f64>() < p {
                        pairs.push((u, v));
                    }
                }
            }
            if pairs.is_empty() {
                pairs.push((0, 1));
            }
            SparseAdjacency::from_pairs(n, &pairs).unwrap()
        })
        .collect();
    MultiViewNetwork::new(n, adjs).unwrap()
}

pub fn random_params(n: usize, sizes: &[usize], views: usize, seed: u64) -> (LayerSpec, RgaeParams) {
    let spec = LayerSpec::new(sizes.to_vec()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = RgaeParams::init(n, &spec, views, &mut rng);
    (spec, params)
}

/// Random point on the simplex.
pub fn random_lambda(views: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..views).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

// ---- dense oracle ---------------------------------------------------------

type Dense = Vec<Vec<f64>>;

fn dense(t: &Tensor) -> Dense {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn to_tensor(m: &Dense) -> Tensor {
    let rows: Vec<&[f64]> = m.iter().map(|r| r.as_slice()).collect();
    Tensor::from_rows(&rows)
}

fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn relu(a: Dense) -> Dense {
    a.into_iter().map(|r| r.into_iter().map(|x| x.max(0.0)).collect()).collect()
}

/// `diag(d)^{-1/2} (A + I) diag(d)^{-1/2}` built from the dense adjacency.
pub fn dense_normalized(adj: &SparseAdjacency) -> Dense {
    let n = adj.n();
    let mut a = dense(&adj.to_dense());
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let d: Vec<f64> = a.iter().map(|r| r.iter().sum::<f64>()).collect();
    let mut left = vec![vec![0.0; n]; n];
    for i in 0..n {
        left[i][i] = 1.0 / d[i].sqrt();
    }
    mul(&mul(&left, &a), &left)
}

/// Binary reconstruction target `A + I` and its positive weight.
pub fn dense_target(adj: &SparseAdjacency) -> (Dense, f64) {
    let n = adj.n();
    let a = dense(&adj.to_dense());
    let mut t = vec![vec![0.0; n]; n];
    let mut ones = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i == j || a[i][j] != 0.0 {
                t[i][j] = 1.0;
                ones += 1;
            }
        }
    }
    let zeros = n * n - ones;
    (t, zeros as f64 / ones as f64)
}

fn encode_dense(s: &Dense, weights: &[Tensor]) -> Dense {
    let mut y = relu(mul(s, &dense(&weights[0])));
    for w in &weights[1..] {
        y = relu(mul(&mul(s, &y), &dense(w)));
    }
    y
}

pub struct DenseView {
    pub shared: Tensor,
    pub private: Tensor,
    pub recon: Tensor,
}

pub fn dense_forward_view(adj: &SparseAdjacency, params: &RgaeParams, view: usize) -> DenseView {
    let s = dense_normalized(adj);
    let ys = encode_dense(&s, &params.shared);
    let yp = encode_dense(&s, &params.private[view]);
    let joined: Dense = ys.iter().zip(&yp).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
    let n = joined.len();
    let mut recon = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let z: f64 = joined[i].iter().zip(&joined[j]).map(|(a, b)| a * b).sum();
            recon[i][j] = 1.0 / (1.0 + (-z).exp());
        }
    }
    DenseView {
        shared: to_tensor(&ys),
        private: to_tensor(&yp),
        recon: to_tensor(&recon),
    }
}

pub fn dense_bce(recon: &Tensor, adj: &SparseAdjacency) -> f64 {
    let (t, w) = dense_target(adj);
    let mut loss = 0.0;
    for (i, row) in t.iter().enumerate() {
        for (j, &y) in row.iter().enumerate() {
            let p = recon.get(i, j).clamp(BCE_EPS, 1.0 - BCE_EPS);
            loss += if y == 1.0 { -w * p.ln() } else { -(1.0 - p).ln() };
        }
    }
    loss
}

pub fn dense_consistent(shared: &[Tensor], lambda: &[f64], gamma: f64) -> Tensor {
    let w: Vec<f64> = lambda.iter().map(|l| l.powf(gamma)).collect();
    let total: f64 = w.iter().sum();
    let (r, c) = shared[0].shape();
    Tensor::from_fn(r, c, |i, j| shared.iter().zip(&w).map(|(y, wi)| wi * y.get(i, j)).sum::<f64>() / total)
}

pub fn dense_similarity(shared: &[Tensor], consistent: &Tensor, lambda: &[f64], gamma: f64) -> f64 {
    shared
        .iter()
        .zip(lambda)
        .map(|(y, l)| {
            let d: f64 = y.data().iter().zip(consistent.data()).map(|(a, b)| (a - b) * (a - b)).sum();
            l.powf(gamma) * d
        })
        .sum()
}

pub fn dense_difference(shared: &Tensor, private: &Tensor) -> f64 {
    (0..shared.rows())
        .map(|i| {
            let d: f64 = shared.row(i).iter().zip(private.row(i)).map(|(a, b)| a * b).sum();
            d * d
        })
        .sum()
}

/// Term-by-term total loss computed without the tape.
pub fn dense_total_loss(net: &MultiViewNetwork, params: &RgaeParams, lambda: &[f64], w: &LossWeights) -> f64 {
    let views: Vec<DenseView> = (0..net.num_views())
        .map(|i| dense_forward_view(net.view(i), params, i))
        .collect();
    let rec: f64 = views.iter().enumerate().map(|(i, v)| dense_bce(&v.recon, net.view(i))).sum();
    let shared: Vec<Tensor> = views.iter().map(|v| v.shared.clone()).collect();
    let con = dense_consistent(&shared, lambda, w.gamma);
    let sim = dense_similarity(&shared, &con, lambda, w.gamma);
    let dif: f64 = views.iter().map(|v| dense_difference(&v.shared, &v.private)).sum();
    let mut total = rec;
    if w.ablation.use_sim {
        total += w.alpha * sim;
    }
    if w.ablation.use_dif {
        total += w.beta * dif;
    }
    total
}

// ---- tape helpers ---------------------------------------------------------

/// Total loss value and its tape gradient, weights in `RgaeParams::weights`
/// order.
pub fn tape_loss_and_grads(
    prepared: &PreparedNetwork,
    params: &RgaeParams,
    lambda: &[f64],
    w: &LossWeights,
) -> (f64, Vec<Tensor>) {
    let mut tape = Tape::new();
    let vars = ParamVars::register(&mut tape, params).unwrap();
    let terms = rgae::model::total_loss(&mut tape, prepared, &vars, lambda, w).unwrap();
    let value = tape.scalar(terms.total).unwrap();
    let grads = tape.backward(terms.total).unwrap();
    (value, vars.all().into_iter().map(|v| grads.dense(v)).collect())
}

pub fn tape_loss(prepared: &PreparedNetwork, params: &RgaeParams, lambda: &[f64], w: &LossWeights) -> f64 {
    let mut tape = Tape::new();
    let vars = ParamVars::register_frozen(&mut tape, params).unwrap();
    let terms = rgae::model::total_loss(&mut tape, prepared, &vars, lambda, w).unwrap();
    tape.scalar(terms.total).unwrap()
}

/// Central differences of `f` with respect to every weight entry.
pub fn finite_difference_grads(params: &RgaeParams, h: f64, f: impl Fn(&RgaeParams) -> f64) -> Vec<Tensor> {
    let mut probe = params.clone();
    let shapes: Vec<(usize, usize)> = params.weights().map(|t| t.shape()).collect();
    let mut out = Vec::with_capacity(shapes.len());
    for (k, &(r, c)) in shapes.iter().enumerate() {
        let mut g = Tensor::zeros(r, c);
        for idx in 0..r * c {
            let orig = params.weights().nth(k).unwrap().data()[idx];
            probe.weights_mut().nth(k).unwrap().data_mut()[idx] = orig + h;
            let up = f(&probe);
            probe.weights_mut().nth(k).unwrap().data_mut()[idx] = orig - h;
            let down = f(&probe);
            probe.weights_mut().nth(k).unwrap().data_mut()[idx] = orig;
            g.data_mut()[idx] = (up - down) / (2.0 * h);
        }
        out.push(g);
    }
    out
}

/// Denominator floor for relative gradient errors: below it the comparison
/// becomes absolute.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    relative_error_floored(a, b, REL_FLOOR)
}

pub fn relative_error_floored(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Denominator floor for gradients of a loss of size `loss` probed with
/// step `h`, chosen so that at relative tolerance `tol` entries near zero may
/// differ by ten times the rounding noise `ε·|loss| / h` of one central
/// difference.
pub fn loss_rounding_floor(loss: f64, h: f64, tol: f64) -> f64 {
    (10.0 * f64::EPSILON * loss.abs() / h / tol).max(REL_FLOOR)
}

/// Largest entrywise relative error between two gradient lists.
pub fn max_relative_error(a: &[Tensor], b: &[Tensor]) -> f64 {
    max_relative_error_floored(a, b, REL_FLOOR)
}

pub fn max_relative_error_floored(a: &[Tensor], b: &[Tensor], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.data().iter().zip(y.data()).map(|(p, q)| relative_error_floored(*p, *q, floor)))
        .fold(0.0, f64::max)
}
