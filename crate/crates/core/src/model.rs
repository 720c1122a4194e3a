//! Shared and private graph auto-encoders with their losses.
//!
//! For view `i` with propagation matrix `S_i`, both encoder stacks apply
//! `Y ← relu(S_i · Y · W)` layer by layer, starting from identity node
//! features. The private stack owns its weights per view; the shared stack
//! reuses one set of weights for every view. The decoder scores node pairs
//! with `sigmoid(Y_i Y_iᵀ)` where `Y_i` concatenates both encoder outputs.
//!
//! Loss terms:
//!
//! - reconstruction: balanced cross-entropy of the decoder output against
//!   `A_i + I`, positives weighted by `#zero / #nonzero`
//! - similarity: `Σ_i λ_i^γ ‖Y_con − Y_{i,s}‖²_F`
//! - difference: `‖rowdot(Y_{i,s}, Y_{i,p})‖²` per view
//!
//! `Y_con` is the `λ^γ`-weighted mean of the shared outputs, which is the
//! exact minimizer of the similarity term for fixed weights.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use thiserror::Error;

use crate::graph::{normalize, GraphError, MultiViewNetwork, NormalizedAdjacency, SparseAdjacency};
use crate::tape::{target_counts, Tape, Var};
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("view weights λ^γ sum to zero")]
    DegenerateWeights,
    #[error("invalid layer sizes: {0}")]
    InvalidLayerSpec(String),
    #[error("total dimension {total} leaves no room for {views} views plus the consistent block")]
    InvalidDimension { total: usize, views: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

/// Per-block width `⌊D / (|V| + 1)⌋`.
pub fn embedding_dim(total_dim: usize, n_views: usize) -> Result<usize> {
    let d = total_dim / (n_views + 1);
    if d == 0 {
        return Err(ModelError::InvalidDimension {
            total: total_dim,
            views: n_views,
        });
    }
    Ok(d)
}

/// Output width of each encoder layer; the last entry is the embedding
/// width `d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    sizes: Vec<usize>,
}

impl LayerSpec {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(ModelError::InvalidLayerSpec("at least one layer is required".into()));
        }
        if sizes.contains(&0) {
            return Err(ModelError::InvalidLayerSpec(format!("zero-width layer in {sizes:?}")));
        }
        Ok(Self { sizes })
    }

    /// Hidden widths followed by the embedding width.
    pub fn with_hidden(hidden: &[usize], embedding_dim: usize) -> Result<Self> {
        let mut sizes = hidden.to_vec();
        sizes.push(embedding_dim);
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn depth(&self) -> usize {
        self.sizes.len()
    }

    pub fn embedding_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty by construction")
    }

    /// `(in, out)` shape of every layer for an `n`-node graph.
    pub fn layer_shapes(&self, n: usize) -> Vec<(usize, usize)> {
        let mut fan_in = n;
        self.sizes
            .iter()
            .map(|&out| {
                let shape = (fan_in, out);
                fan_in = out;
                shape
            })
            .collect()
    }
}

/// Trainable weights plus the view-weight vector λ.
#[derive(Debug, Clone, PartialEq)]
pub struct RgaeParams {
    /// `private[i][l]` is layer `l` of view `i`'s private encoder.
    pub private: Vec<Vec<Tensor>>,
    /// One stack used by every view.
    pub shared: Vec<Tensor>,
    /// View weights on the probability simplex.
    pub lambda: Vec<f64>,
}

impl RgaeParams {
    /// Glorot-uniform weights, drawn shared stack first and then private
    /// stacks in view order. λ starts uniform.
    pub fn init<R: Rng + ?Sized>(n: usize, spec: &LayerSpec, n_views: usize, rng: &mut R) -> Self {
        let shapes = spec.layer_shapes(n);
        let stack = |rng: &mut R| -> Vec<Tensor> {
            shapes
                .iter()
                .map(|&(fan_in, fan_out)| {
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let dist = Uniform::new_inclusive(-limit, limit);
                    Tensor::from_fn(fan_in, fan_out, |_, _| dist.sample(rng))
                })
                .collect()
        };
        let shared = stack(rng);
        let private = (0..n_views).map(|_| stack(rng)).collect();
        Self {
            private,
            shared,
            lambda: vec![1.0 / n_views as f64; n_views],
        }
    }

    pub fn zeros(n: usize, spec: &LayerSpec, n_views: usize) -> Self {
        let stack: Vec<Tensor> = spec
            .layer_shapes(n)
            .into_iter()
            .map(|(r, c)| Tensor::zeros(r, c))
            .collect();
        Self {
            private: vec![stack.clone(); n_views],
            shared: stack,
            lambda: vec![1.0 / n_views as f64; n_views],
        }
    }

    pub fn num_views(&self) -> usize {
        self.private.len()
    }

    pub fn depth(&self) -> usize {
        self.shared.len()
    }

    /// All weight matrices, shared stack first.
    pub fn weights(&self) -> impl Iterator<Item = &Tensor> {
        self.shared.iter().chain(self.private.iter().flatten())
    }

    pub fn weights_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.shared.iter_mut().chain(self.private.iter_mut().flatten())
    }

    /// Checks every layer shape against `spec` for an `n`-node graph.
    pub fn validate(&self, n: usize, spec: &LayerSpec) -> Result<()> {
        let shapes = spec.layer_shapes(n);
        let check = |stack: &[Tensor], what: &str| -> Result<()> {
            if stack.len() != shapes.len() {
                return Err(ModelError::ShapeMismatch(format!(
                    "{what} has {} layers, expected {}",
                    stack.len(),
                    shapes.len()
                )));
            }
            for (l, (w, &s)) in stack.iter().zip(&shapes).enumerate() {
                if w.shape() != s {
                    return Err(ModelError::ShapeMismatch(format!(
                        "{what} layer {l} is {:?}, expected {s:?}",
                        w.shape()
                    )));
                }
            }
            Ok(())
        };
        check(&self.shared, "shared stack")?;
        for (i, stack) in self.private.iter().enumerate() {
            check(stack, &format!("private stack {i}"))?;
        }
        if self.lambda.len() != self.private.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} view weights for {} views",
                self.lambda.len(),
                self.private.len()
            )));
        }
        Ok(())
    }
}

/// Per-view constants derived once from the input network.
#[derive(Debug, Clone)]
pub struct PreparedView {
    pub norm: Arc<NormalizedAdjacency>,
    /// Binarized adjacency used as the reconstruction target.
    pub target: Arc<SparseAdjacency>,
    /// `#zero / #nonzero` over the `N x N` target including its unit diagonal.
    pub pos_weight: f64,
}

impl PreparedView {
    pub fn new(adj: &SparseAdjacency) -> Result<Self> {
        let norm = normalize(adj)?;
        let target = SparseAdjacency::from_csr(
            adj.n(),
            adj.row_offsets().to_vec(),
            adj.col_indices().to_vec(),
            adj.values().iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect(),
            adj.is_symmetric(),
        )?;
        let (pos, zero) = target_counts(&target);
        Ok(Self {
            norm: Arc::new(norm),
            target: Arc::new(target),
            pos_weight: zero as f64 / pos as f64,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PreparedNetwork {
    n: usize,
    views: Vec<PreparedView>,
}

impl PreparedNetwork {
    pub fn new(net: &MultiViewNetwork) -> Result<Self> {
        let views = net
            .views()
            .iter()
            .map(PreparedView::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n: net.n(), views })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[PreparedView] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &PreparedView {
        &self.views[i]
    }
}

/// Tape handles for every weight matrix.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub shared: Vec<Var>,
    pub private: Vec<Vec<Var>>,
}

impl ParamVars {
    /// Records the weights as trainable leaves.
    pub fn register(tape: &mut Tape, params: &RgaeParams) -> Result<Self> {
        Self::record(tape, params, true)
    }

    /// Records the weights as constants, for gradient-free evaluation.
    pub fn register_frozen(tape: &mut Tape, params: &RgaeParams) -> Result<Self> {
        Self::record(tape, params, false)
    }

    fn record(tape: &mut Tape, params: &RgaeParams, trainable: bool) -> Result<Self> {
        let mut leaf = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let shared = params.shared.iter().map(&mut leaf).collect::<std::result::Result<Vec<_>, _>>()?;
        let private = params
            .private
            .iter()
            .map(|stack| stack.iter().map(&mut leaf).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { shared, private })
    }

    /// Handles in the same order as [`RgaeParams::weights`].
    pub fn all(&self) -> Vec<Var> {
        self.shared
            .iter()
            .chain(self.private.iter().flatten())
            .copied()
            .collect()
    }
}

fn encode(tape: &mut Tape, norm: &Arc<NormalizedAdjacency>, weights: &[Var]) -> Result<Var> {
    let mut y: Option<Var> = None;
    for &w in weights {
        let pre = match y {
            // Identity input features: S · I · W = S · W.
            None => tape.spmm(norm, w)?,
            Some(prev) => {
                let propagated = tape.spmm(norm, prev)?;
                tape.matmul(propagated, w)?
            }
        };
        y = Some(tape.relu(pre)?);
    }
    y.ok_or_else(|| ModelError::InvalidLayerSpec("encoder without layers".into()))
}

/// Encoder outputs and decoder reconstruction of one view.
#[derive(Debug, Clone, Copy)]
pub struct ViewForward {
    pub shared: Var,
    pub private: Var,
    pub recon: Var,
}

/// Runs both encoders of view `view`.
pub fn encode_view(
    tape: &mut Tape,
    prepared: &PreparedView,
    vars: &ParamVars,
    view: usize,
) -> Result<(Var, Var)> {
    let private_weights = vars.private.get(view).ok_or_else(|| {
        ModelError::ShapeMismatch(format!("no private encoder for view {view}"))
    })?;
    let shared = encode(tape, &prepared.norm, &vars.shared)?;
    let private = encode(tape, &prepared.norm, private_weights)?;
    Ok((shared, private))
}

/// `sigmoid((Y_s ⊕ Y_p)(Y_s ⊕ Y_p)ᵀ)`.
pub fn decode(tape: &mut Tape, shared: Var, private: Var) -> Result<Var> {
    let joined = tape.concat_cols(shared, private)?;
    let logits = tape.gram(joined)?;
    Ok(tape.sigmoid(logits)?)
}

pub fn forward_view(
    tape: &mut Tape,
    prepared: &PreparedView,
    vars: &ParamVars,
    view: usize,
) -> Result<ViewForward> {
    let (shared, private) = encode_view(tape, prepared, vars, view)?;
    let recon = decode(tape, shared, private)?;
    Ok(ViewForward {
        shared,
        private,
        recon,
    })
}

/// Normalized combination weights `λ_i^γ / Σ_j λ_j^γ`.
pub fn consensus_weights(lambda: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let raw: Vec<f64> = lambda.iter().map(|l| l.powf(gamma)).collect();
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(ModelError::DegenerateWeights);
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// `Y_con = Σ_i λ_i^γ Y_{i,s} / Σ_i λ_i^γ`.
pub fn consistent_embedding(shared: &[Tensor], lambda: &[f64], gamma: f64) -> Result<Tensor> {
    if shared.is_empty() || shared.len() != lambda.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} shared outputs for {} view weights",
            shared.len(),
            lambda.len()
        )));
    }
    let weights = consensus_weights(lambda, gamma)?;
    let (r, c) = shared[0].shape();
    let mut out = Tensor::zeros(r, c);
    for (y, w) in shared.iter().zip(weights) {
        out.axpy(w, y)?;
    }
    Ok(out)
}

/// Tape version of [`consistent_embedding`]; λ enters as a constant.
pub fn consistent_embedding_var(tape: &mut Tape, shared: &[Var], lambda: &[f64], gamma: f64) -> Result<Var> {
    if shared.is_empty() || shared.len() != lambda.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} shared outputs for {} view weights",
            shared.len(),
            lambda.len()
        )));
    }
    let weights = consensus_weights(lambda, gamma)?;
    let mut terms = Vec::with_capacity(shared.len());
    for (&y, w) in shared.iter().zip(weights) {
        terms.push(tape.scale(y, w)?);
    }
    Ok(tape.sum_all(&terms)?)
}

/// `Σ_i λ_i^γ ‖Y_con − Y_{i,s}‖²_F` with λ and γ as constants.
pub fn similarity_loss(
    tape: &mut Tape,
    shared: &[Var],
    consistent: Var,
    lambda: &[f64],
    gamma: f64,
) -> Result<Var> {
    if shared.is_empty() || shared.len() != lambda.len() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} shared outputs for {} view weights",
            shared.len(),
            lambda.len()
        )));
    }
    let mut terms = Vec::with_capacity(shared.len());
    for (&y, &l) in shared.iter().zip(lambda) {
        let diff = tape.sub(consistent, y)?;
        let sq = tape.sq_frobenius(diff)?;
        terms.push(tape.scale(sq, l.powf(gamma))?);
    }
    Ok(tape.sum_all(&terms)?)
}

/// Squared norm of the row-wise inner products of `Y_s` and `Y_p`.
pub fn difference_loss(tape: &mut Tape, shared: Var, private: Var) -> Result<Var> {
    let dots = tape.row_dot(shared, private)?;
    Ok(tape.sq_frobenius(dots)?)
}

pub fn reconstruction_loss(tape: &mut Tape, recon: Var, prepared: &PreparedView) -> Result<Var> {
    Ok(tape.balanced_bce(recon, &prepared.target, prepared.pos_weight)?)
}

/// Which regularizers enter the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ablation {
    pub use_sim: bool,
    pub use_dif: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        use_sim: true,
        use_dif: true,
    };
    pub const NO_SIM: Ablation = Ablation {
        use_sim: false,
        use_dif: true,
    };
    pub const NO_DIF: Ablation = Ablation {
        use_sim: true,
        use_dif: false,
    };
    pub const NO_BOTH: Ablation = Ablation {
        use_sim: false,
        use_dif: false,
    };
}

impl Default for Ablation {
    fn default() -> Self {
        Self::FULL
    }
}

/// Names the removed terms: `none`, `sim`, `dif` or `both`.
impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::FULL),
            "sim" => Ok(Self::NO_SIM),
            "dif" => Ok(Self::NO_DIF),
            "both" => Ok(Self::NO_BOTH),
            other => Err(format!("unknown ablation {other:?}, expected none|sim|dif|both")),
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match (self.use_sim, self.use_dif) {
            (true, true) => "none",
            (false, true) => "sim",
            (true, false) => "dif",
            (false, false) => "both",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub ablation: Ablation,
}

/// Handles for every term of one forward pass.
#[derive(Debug, Clone)]
pub struct LossTerms {
    pub total: Var,
    pub reconstruction: Vec<Var>,
    pub similarity: Var,
    pub difference: Vec<Var>,
    pub consistent: Var,
    pub views: Vec<ViewForward>,
}

/// `Σ_i L_i^rec + α·L^sim + β·Σ_i L_i^dif`, with ablated terms left out of
/// the total. The similarity and difference terms are still recorded so they
/// can be reported.
pub fn total_loss(
    tape: &mut Tape,
    net: &PreparedNetwork,
    vars: &ParamVars,
    lambda: &[f64],
    weights: &LossWeights,
) -> Result<LossTerms> {
    if vars.private.len() != net.num_views() || lambda.len() != net.num_views() {
        return Err(ModelError::ShapeMismatch(format!(
            "{} views, {} private stacks, {} view weights",
            net.num_views(),
            vars.private.len(),
            lambda.len()
        )));
    }
    let mut views = Vec::with_capacity(net.num_views());
    let mut reconstruction = Vec::with_capacity(net.num_views());
    let mut difference = Vec::with_capacity(net.num_views());
    for (i, prepared) in net.views().iter().enumerate() {
        let fwd = forward_view(tape, prepared, vars, i)?;
        reconstruction.push(reconstruction_loss(tape, fwd.recon, prepared)?);
        difference.push(difference_loss(tape, fwd.shared, fwd.private)?);
        views.push(fwd);
    }
    let shared: Vec<Var> = views.iter().map(|v| v.shared).collect();
    let consistent = consistent_embedding_var(tape, &shared, lambda, weights.gamma)?;
    let similarity = similarity_loss(tape, &shared, consistent, lambda, weights.gamma)?;

    let mut total = tape.sum_all(&reconstruction)?;
    if weights.ablation.use_sim {
        let term = tape.scale(similarity, weights.alpha)?;
        total = tape.add(total, term)?;
    }
    if weights.ablation.use_dif {
        let dif = tape.sum_all(&difference)?;
        let term = tape.scale(dif, weights.beta)?;
        total = tape.add(total, term)?;
    }
    Ok(LossTerms {
        total,
        reconstruction,
        similarity,
        difference,
        consistent,
        views,
    })
}

/// Encoder outputs and the aggregated representation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub shared: Vec<Tensor>,
    pub private: Vec<Tensor>,
    pub consistent: Tensor,
    /// `Y_con ⊕ Y_{1,p} ⊕ … ⊕ Y_{|V|,p}`.
    pub aggregated: Tensor,
}

impl EmbeddingSet {
    pub fn new(shared: Vec<Tensor>, private: Vec<Tensor>, consistent: Tensor) -> Result<Self> {
        let aggregated = aggregate_parts(&consistent, &private)?;
        if shared.len() != private.len() {
            return Err(ModelError::ShapeMismatch(format!(
                "{} shared and {} private outputs",
                shared.len(),
                private.len()
            )));
        }
        for y in &shared {
            if y.shape() != consistent.shape() {
                return Err(ModelError::ShapeMismatch(format!(
                    "shared output {:?} vs consistent {:?}",
                    y.shape(),
                    consistent.shape()
                )));
            }
        }
        Ok(Self {
            shared,
            private,
            consistent,
            aggregated,
        })
    }

    pub fn num_views(&self) -> usize {
        self.private.len()
    }

    pub fn block_dim(&self) -> usize {
        self.consistent.cols()
    }
}

fn aggregate_parts(consistent: &Tensor, private: &[Tensor]) -> Result<Tensor> {
    let mut out = consistent.clone();
    for y in private {
        if y.shape() != consistent.shape() {
            return Err(ModelError::ShapeMismatch(format!(
                "private output {:?} vs consistent {:?}",
                y.shape(),
                consistent.shape()
            )));
        }
        out = out.concat_cols(y)?;
    }
    Ok(out)
}

/// Column concatenation of the consistent block and every private block.
pub fn aggregate(embeds: &EmbeddingSet) -> Result<Tensor> {
    aggregate_parts(&embeds.consistent, &embeds.private)
}

/// Gradient-free forward pass producing all embeddings.
pub fn embed(net: &PreparedNetwork, params: &RgaeParams, gamma: f64) -> Result<EmbeddingSet> {
    let mut tape = Tape::new();
    let vars = ParamVars::register_frozen(&mut tape, params)?;
    let mut shared = Vec::with_capacity(net.num_views());
    let mut private = Vec::with_capacity(net.num_views());
    for (i, prepared) in net.views().iter().enumerate() {
        let (s, p) = encode_view(&mut tape, prepared, &vars, i)?;
        shared.push(tape.value(s).clone());
        private.push(tape.value(p).clone());
    }
    let consistent = consistent_embedding(&shared, &params.lambda, gamma)?;
    EmbeddingSet::new(shared, private, consistent)
}
