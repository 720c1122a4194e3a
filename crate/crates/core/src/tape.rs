//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] is an append-only list of recorded operations. Every op pushes
//! its forward value immediately; [`Tape::backward`] then walks the nodes in
//! reverse insertion order and accumulates `∂root/∂node` for every node that
//! depends on a trainable leaf. Operand ids always precede their consumer, so
//! a single reverse sweep is a valid topological order.
//!
//! Only the handful of ops the model needs are provided. Each forward value is
//! checked for NaN/Inf as it is recorded.

use std::sync::Arc;

use crate::graph::{spmm, NormalizedAdjacency, SparseAdjacency};
use crate::tensor::{Result, Tensor, TensorError};

/// Clamp used by [`Tape::balanced_bce`] before taking logarithms.
pub const BCE_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Spmm(Arc<NormalizedAdjacency>, Var),
    Relu(Var),
    Sigmoid(Var),
    ConcatCols(Var, Var),
    Gram(Var),
    RowDot(Var, Var),
    SqFrobenius(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    BalancedBce {
        probs: Var,
        target: Arc<SparseAdjacency>,
        pos_weight: f64,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Result of [`Tape::backward`]: one gradient slot per tape node.
#[derive(Debug, Clone)]
pub struct Gradients {
    slots: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient of the root with respect to `v`. `None` means the root does
    /// not depend on `v` through any differentiable path (a zero gradient).
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.slots[v.0].as_ref()
    }

    /// Like [`Gradients::get`] but materializes zeros.
    pub fn dense(&self, v: Var) -> Tensor {
        match &self.slots[v.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[v.0];
                Tensor::zeros(r, c)
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> Option<f64> {
        self.nodes[v.0].value.item()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool, name: &'static str) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NumericalOverflow { op: name });
        }
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.push(Op::Leaf, value, true, "param")
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(Op::Leaf, value, false, "constant")
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::MatMul(a, b), value, rg, "matmul")
    }

    /// `norm · b` with a constant sparse left operand.
    pub fn spmm(&mut self, norm: &Arc<NormalizedAdjacency>, b: Var) -> Result<Var> {
        let value = spmm(norm, self.value(b))?;
        let rg = self.rg(b);
        self.push(Op::Spmm(Arc::clone(norm), b), value, rg, "spmm")
    }

    /// Elementwise `max(x, 0)`; the subgradient at exactly 0 is 0.
    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(Op::Relu(a), value, rg, "relu")
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        let rg = self.rg(a);
        self.push(Op::Sigmoid(a), value, rg, "sigmoid")
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).concat_cols(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::ConcatCols(a, b), value, rg, "concat_cols")
    }

    /// `a · aᵀ`.
    pub fn gram(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let value = av.matmul_t(av)?;
        let rg = self.rg(a);
        self.push(Op::Gram(a), value, rg, "gram")
    }

    /// Column vector of row-wise inner products `Σ_j a_ij b_ij`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        av.same_shape(bv, "row_dot")?;
        let value = Tensor::from_fn(av.rows(), 1, |r, _| crate::tensor::dot(av.row(r), bv.row(r)));
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::RowDot(a, b), value, rg, "row_dot")
    }

    /// Squared Frobenius norm as a 1x1 node.
    pub fn sq_frobenius(&mut self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.value(a).sq_frobenius());
        let rg = self.rg(a);
        self.push(Op::SqFrobenius(a), value, rg, "sq_frobenius")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::Add(a, b), value, rg, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        self.push(Op::Sub(a, b), value, rg, "sub")
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let value = self.value(a).scale(c);
        let rg = self.rg(a);
        self.push(Op::Scale(a, c), value, rg, "scale")
    }

    /// Left fold of [`Tape::add`] over `vars`.
    pub fn sum_all(&mut self, vars: &[Var]) -> Result<Var> {
        let (&first, rest) = vars.split_first().ok_or(TensorError::ShapeMismatch {
            op: "sum_all",
            left: (0, 0),
            right: (0, 0),
        })?;
        rest.iter().try_fold(first, |acc, &v| self.add(acc, v))
    }

    /// Balanced binary cross-entropy between an `n x n` probability matrix
    /// and the binarized target `A + I`:
    ///
    /// `Σ_{m,n} −a·ς·ln p − (1 − a)·ln(1 − p)`
    ///
    /// where `a = 1` on the diagonal and wherever `target` stores a positive
    /// weight. Probabilities are clamped to `[ε, 1 − ε]` with
    /// [`BCE_EPS`]; the clamp has zero derivative outside that range.
    pub fn balanced_bce(
        &mut self,
        probs: Var,
        target: &Arc<SparseAdjacency>,
        pos_weight: f64,
    ) -> Result<Var> {
        let p = self.value(probs);
        let n = target.n();
        if p.shape() != (n, n) {
            return Err(TensorError::ShapeMismatch {
                op: "balanced_bce",
                left: p.shape(),
                right: (n, n),
            });
        }
        let mut total = 0.0;
        for_each_target_entry(target, |m, col, positive| {
            let q = p.get(m, col).clamp(BCE_EPS, 1.0 - BCE_EPS);
            total += if positive {
                -pos_weight * q.ln()
            } else {
                -(1.0 - q).ln()
            };
        });
        let rg = self.rg(probs);
        self.push(
            Op::BalancedBce {
                probs,
                target: Arc::clone(target),
                pos_weight,
            },
            Tensor::scalar(total),
            rg,
            "balanced_bce",
        )
    }

    /// Reverse sweep from a 1x1 `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let (r, c) = self.value(root).shape();
        if (r, c) != (1, 1) {
            return Err(TensorError::NonScalarRoot { rows: r, cols: c });
        }
        let mut slots: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        let shapes = self.nodes.iter().map(|n| n.value.shape()).collect();
        if self.nodes[root.0].requires_grad {
            slots[root.0] = Some(Tensor::scalar(1.0));
        }

        for idx in (0..=root.0).rev() {
            let Some(grad) = slots[idx].clone() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let ga = grad.matmul_t(self.value(*b))?;
                        accumulate(&mut slots, *a, ga)?;
                    }
                    if self.rg(*b) {
                        let gb = self.value(*a).t_matmul(&grad)?;
                        accumulate(&mut slots, *b, gb)?;
                    }
                }
                Op::Spmm(norm, b) => {
                    // The normalized adjacency is symmetric, so Sᵀ·g = S·g.
                    if self.rg(*b) {
                        accumulate(&mut slots, *b, spmm(norm, &grad)?)?;
                    }
                }
                Op::Relu(a) => {
                    if self.rg(*a) {
                        let ga = self
                            .value(*a)
                            .zip_map(&grad, "relu_backward", |x, g| if x > 0.0 { g } else { 0.0 })?;
                        accumulate(&mut slots, *a, ga)?;
                    }
                }
                Op::Sigmoid(a) => {
                    if self.rg(*a) {
                        let ga = node
                            .value
                            .zip_map(&grad, "sigmoid_backward", |s, g| g * s * (1.0 - s))?;
                        accumulate(&mut slots, *a, ga)?;
                    }
                }
                Op::ConcatCols(a, b) => {
                    let wa = self.value(*a).cols();
                    let wb = self.value(*b).cols();
                    if self.rg(*a) {
                        accumulate(&mut slots, *a, grad.slice_cols(0, wa))?;
                    }
                    if self.rg(*b) {
                        accumulate(&mut slots, *b, grad.slice_cols(wa, wb))?;
                    }
                }
                Op::Gram(a) => {
                    if self.rg(*a) {
                        let sym = grad.add(&grad.transpose())?;
                        accumulate(&mut slots, *a, sym.matmul(self.value(*a))?)?;
                    }
                }
                Op::RowDot(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.rg(*a) {
                        let ga = Tensor::from_fn(av.rows(), av.cols(), |r, c| grad.get(r, 0) * bv.get(r, c));
                        accumulate(&mut slots, *a, ga)?;
                    }
                    if self.rg(*b) {
                        let gb = Tensor::from_fn(bv.rows(), bv.cols(), |r, c| grad.get(r, 0) * av.get(r, c));
                        accumulate(&mut slots, *b, gb)?;
                    }
                }
                Op::SqFrobenius(a) => {
                    if self.rg(*a) {
                        let g = grad.get(0, 0);
                        accumulate(&mut slots, *a, self.value(*a).scale(2.0 * g))?;
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut slots, *a, grad.clone())?;
                    }
                    if self.rg(*b) {
                        accumulate(&mut slots, *b, grad)?;
                    }
                }
                Op::Sub(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut slots, *a, grad.clone())?;
                    }
                    if self.rg(*b) {
                        accumulate(&mut slots, *b, grad.scale(-1.0))?;
                    }
                }
                Op::Scale(a, c) => {
                    if self.rg(*a) {
                        accumulate(&mut slots, *a, grad.scale(*c))?;
                    }
                }
                Op::BalancedBce {
                    probs,
                    target,
                    pos_weight,
                } => {
                    if self.rg(*probs) {
                        let g = grad.get(0, 0);
                        let p = self.value(*probs);
                        let mut gp = Tensor::zeros(p.rows(), p.cols());
                        for_each_target_entry(target, |m, col, positive| {
                            let q = p.get(m, col);
                            let d = if !(BCE_EPS..=1.0 - BCE_EPS).contains(&q) {
                                0.0
                            } else if positive {
                                -pos_weight / q
                            } else {
                                1.0 / (1.0 - q)
                            };
                            gp.set(m, col, g * d);
                        });
                        accumulate(&mut slots, *probs, gp)?;
                    }
                }
            }
        }
        Ok(Gradients { slots, shapes })
    }
}

fn accumulate(slots: &mut [Option<Tensor>], v: Var, g: Tensor) -> Result<()> {
    match &mut slots[v.0] {
        Some(existing) => existing.axpy(1.0, &g),
        slot @ None => {
            *slot = Some(g);
            Ok(())
        }
    }
}

/// Visits every `(row, col)` of the `n x n` target in row-major order, with
/// `positive` set on the diagonal and on stored entries with weight > 0.
fn for_each_target_entry(target: &SparseAdjacency, mut f: impl FnMut(usize, usize, bool)) {
    let n = target.n();
    for m in 0..n {
        let mut entries = target.row(m).filter(|&(_, w)| w > 0.0).map(|(c, _)| c).peekable();
        for col in 0..n {
            let stored = entries.peek() == Some(&col);
            if stored {
                entries.next();
            }
            f(m, col, stored || col == m);
        }
    }
}

/// Number of positive (`a = 1`) and zero entries of the binarized `A + I`.
pub fn target_counts(target: &SparseAdjacency) -> (usize, usize) {
    let n = target.n();
    let positive = n + target.values().iter().filter(|&&w| w > 0.0).count();
    (positive, n * n - positive)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
