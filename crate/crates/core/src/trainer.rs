//! Joint optimization: Adam steps on the encoder weights, closed-form view
//! weight updates, and loss-plateau stopping.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::MultiViewNetwork;
use crate::model::{
    consistent_embedding, embed, embedding_dim, encode_view, total_loss, Ablation,
    EmbeddingSet, LayerSpec, LossWeights, ModelError, ParamVars, PreparedNetwork, RgaeParams,
};
use crate::tape::Tape;
use crate::tensor::{Tensor, TensorError};

/// Floor applied to `B_i` before the power in [`update_lambda`].
pub const B_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("γ must be positive and different from 1, got {0}")]
    InvalidGamma(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("non-finite values at epoch {epoch}: {source}")]
    NumericalOverflow {
        epoch: usize,
        #[source]
        source: TensorError,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// Closed-form view weights `λ_i ∝ (γ B_i)^{1/(1−γ)}`.
///
/// Evaluated in log space, so exponents such as `-100` at `γ = 1.01` do not
/// overflow. Each `B_i` is floored at [`B_FLOOR`].
pub fn update_lambda(b: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0) || gamma == 1.0 || !gamma.is_finite() {
        return Err(TrainError::InvalidGamma(gamma));
    }
    if b.is_empty() {
        return Err(TrainError::InvalidInput("no view distances".into()));
    }
    if let Some(bad) = b.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(TrainError::InvalidInput(format!("view distance {bad} is not a finite non-negative number")));
    }
    let exponent = 1.0 / (1.0 - gamma);
    let logs: Vec<f64> = b
        .iter()
        .map(|&x| exponent * (gamma.ln() + x.max(B_FLOOR).ln()))
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(unnorm.into_iter().map(|u| u / total).collect())
}

/// `B_i = ‖Y_con − Y_{i,s}‖²_F` for every view.
pub fn view_distances(shared: &[Tensor], consistent: &Tensor) -> Result<Vec<f64>> {
    shared
        .iter()
        .map(|y| Ok(consistent.sub(y)?.sq_frobenius()))
        .collect()
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment buffers, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new<'a>(params: impl IntoIterator<Item = &'a Tensor>) -> Self {
        let m: Vec<Tensor> = params
            .into_iter()
            .map(|p| Tensor::zeros(p.rows(), p.cols()))
            .collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update with `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
pub fn adam_step<'a>(
    params: impl IntoIterator<Item = &'a mut Tensor>,
    grads: &[Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    let params: Vec<&mut Tensor> = params.into_iter().collect();
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(TrainError::InvalidInput(format!(
            "{} parameters, {} gradients, {} moment buffers",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for ((p, g), m) in params.iter().zip(grads).zip(&state.m) {
        p.same_shape(g, "adam_step")?;
        p.same_shape(m, "adam_step")?;
    }
    state.step += 1;
    let t = state.step as i32;
    let bias1 = 1.0 - ADAM_BETA1.powi(t);
    let bias2 = 1.0 - ADAM_BETA2.powi(t);
    for (((p, g), m), v) in params
        .into_iter()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        let (pd, gd) = (p.data_mut(), g.data());
        for (((x, &gi), mi), vi) in pd
            .iter_mut()
            .zip(gd)
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = ADAM_BETA1 * *mi + (1.0 - ADAM_BETA1) * gi;
            *vi = ADAM_BETA2 * *vi + (1.0 - ADAM_BETA2) * gi * gi;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *x -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Total embedding width `D`; each block gets `⌊D / (|V| + 1)⌋`.
    pub total_dim: usize,
    /// Hidden layer widths. The embedding layer is appended automatically.
    pub hidden: Vec<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lr: f64,
    pub max_epochs: usize,
    /// Consecutive small-change epochs before stopping; `None` never stops
    /// early.
    pub patience: Option<usize>,
    /// Relative loss change regarded as a plateau.
    pub tol: f64,
    pub seed: u64,
    pub ablation: Ablation,
    pub lambda_update_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_dim: 128,
            hidden: vec![800, 400],
            alpha: 0.5,
            beta: 0.5,
            gamma: 5.0,
            lr: 0.01,
            max_epochs: 500,
            patience: Some(20),
            tol: 1e-5,
            seed: 0,
            ablation: Ablation::FULL,
            lambda_update_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n_views: usize) -> Result<()> {
        let bad = |msg: String| Err(TrainError::Config(msg));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be >= 0, got {}", self.beta));
        }
        if !(self.gamma > 0.0) || self.gamma == 1.0 || !self.gamma.is_finite() {
            return Err(TrainError::InvalidGamma(self.gamma));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(self.tol >= 0.0) {
            return bad(format!("tol must be >= 0, got {}", self.tol));
        }
        if self.lambda_update_every == 0 {
            return bad("lambda_update_every must be >= 1".into());
        }
        if self.total_dim < n_views + 1 {
            return bad(format!(
                "dim {} is smaller than |V| + 1 = {}",
                self.total_dim,
                n_views + 1
            ));
        }
        if self.hidden.contains(&0) {
            return bad(format!("zero-width hidden layer in {:?}", self.hidden));
        }
        Ok(())
    }

    pub fn layer_spec(&self, n_views: usize) -> Result<LayerSpec> {
        let d = embedding_dim(self.total_dim, n_views)?;
        Ok(LayerSpec::with_hidden(&self.hidden, d)?)
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            ablation: self.ablation,
        }
    }
}

/// Loss components of one epoch. Regularizer values are unscaled and are
/// reported even when ablated.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub reconstruction: f64,
    pub similarity: f64,
    pub difference: f64,
    pub total: f64,
    /// View weights after this epoch's update.
    pub lambda: Vec<f64>,
}

impl EpochRecord {
    pub const TSV_HEADER: &'static str = "epoch\tl_rec\tl_sim\tl_dif\tl_total\tlambda";
}

/// Tab-separated line: epoch, losses, then λ as a comma list.
impl fmt::Display for EpochRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:.17e}\t{:.17e}\t{:.17e}\t{:.17e}\t",
            self.epoch, self.reconstruction, self.similarity, self.difference, self.total
        )?;
        for (i, l) in self.lambda.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{l:.17e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: RgaeParams,
    pub layer_spec: LayerSpec,
    pub embeddings: EmbeddingSet,
    pub history: Vec<EpochRecord>,
    /// Whether the plateau rule stopped training before `max_epochs`.
    pub converged: bool,
}

impl TrainOutput {
    pub fn final_embedding(&self) -> &Tensor {
        &self.embeddings.aggregated
    }
}

pub fn train(net: &MultiViewNetwork, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with_observer(net, cfg, |_| {})
}

/// Full-batch training. `observer` sees every epoch record as it is produced.
pub fn train_with_observer(
    net: &MultiViewNetwork,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrainOutput> {
    let n_views = net.num_views();
    cfg.validate(n_views)?;
    let prepared = PreparedNetwork::new(net)?;
    let spec = cfg.layer_spec(n_views)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = RgaeParams::init(net.n(), &spec, n_views, &mut rng);
    let mut adam = AdamState::new(params.weights());
    let weights = cfg.loss_weights();

    let mut history = Vec::with_capacity(cfg.max_epochs);
    let mut stalled = 0usize;
    let mut converged = false;

    for epoch in 0..cfg.max_epochs {
        let overflow = |e: ModelError| match e {
            ModelError::Tensor(source @ TensorError::NumericalOverflow { .. }) => {
                TrainError::NumericalOverflow { epoch, source }
            }
            other => TrainError::Model(other),
        };
        let mut tape = Tape::new();
        let vars = ParamVars::register(&mut tape, &params).map_err(overflow)?;
        let terms = total_loss(&mut tape, &prepared, &vars, &params.lambda, &weights).map_err(overflow)?;
        let value = |v| tape.scalar(v).expect("loss terms are scalars");
        let reconstruction: f64 = terms.reconstruction.iter().map(|&v| value(v)).sum();
        let difference: f64 = terms.difference.iter().map(|&v| value(v)).sum();
        let similarity = value(terms.similarity);
        let total = value(terms.total);

        let grads = tape.backward(terms.total)?;
        let grads: Vec<Tensor> = vars.all().into_iter().map(|v| grads.dense(v)).collect();
        adam_step(params.weights_mut(), &grads, &mut adam, cfg.lr)?;

        if (epoch + 1) % cfg.lambda_update_every == 0 {
            params.lambda = refreshed_lambda(&prepared, &params, cfg.gamma).map_err(|e| match e {
                TrainError::Model(m) => overflow(m),
                other => other,
            })?;
        }

        let record = EpochRecord {
            epoch,
            reconstruction,
            similarity,
            difference,
            total,
            lambda: params.lambda.clone(),
        };
        observer(&record);
        let previous = history.last().map(|r: &EpochRecord| r.total);
        history.push(record);

        if let Some(prev) = previous {
            let rel = (total - prev).abs() / prev.abs().max(f64::MIN_POSITIVE);
            if rel < cfg.tol {
                stalled += 1;
            } else {
                stalled = 0;
            }
            if cfg.patience.is_some_and(|p| stalled >= p) {
                converged = true;
                break;
            }
        }
    }

    let embeddings = embed(&prepared, &params, cfg.gamma)?;
    Ok(TrainOutput {
        params,
        layer_spec: spec,
        embeddings,
        history,
        converged,
    })
}

/// Recomputes the shared outputs with the current weights, forms `Y_con`
/// under the current λ, and applies [`update_lambda`].
fn refreshed_lambda(prepared: &PreparedNetwork, params: &RgaeParams, gamma: f64) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let vars = ParamVars::register_frozen(&mut tape, params)?;
    let mut shared = Vec::with_capacity(prepared.num_views());
    for (i, view) in prepared.views().iter().enumerate() {
        let (s, _) = encode_view(&mut tape, view, &vars, i)?;
        shared.push(tape.value(s).clone());
    }
    let consistent = consistent_embedding(&shared, &params.lambda, gamma)?;
    let b = view_distances(&shared, &consistent)?;
    update_lambda(&b, gamma)
}

/// Spread `max λ − min λ` of a weight vector.
pub fn lambda_dispersion(lambda: &[f64]) -> f64 {
    let max = lambda.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = lambda.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}
