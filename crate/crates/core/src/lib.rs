//! Multi-view network embedding with regularized graph auto-encoders.
//!
//! Each view of a network gets two GCN encoders: a private stack owned by the
//! view and a shared stack whose weights are tied across all views. An
//! inner-product decoder reconstructs every view's adjacency from the
//! concatenated encoder outputs. Two regularizers shape the encoders: a
//! weighted similarity loss pulls the shared outputs toward a consistent
//! embedding, and a difference loss keeps shared and private outputs
//! orthogonal row by row. The final representation concatenates the
//! consistent embedding with every private embedding.
//!
//! Module map:
//!
//! - [`graph`]: CSR adjacency, symmetric normalization, edge-list IO, Jaccard analysis
//! - [`tensor`] and [`tape`]: dense matrices and a reverse-mode autodiff tape
//! - [`model`]: encoders, decoder, losses and aggregation
//! - [`trainer`]: Adam, view-weight updates and the training loop
//! - [`eval`]: node classification and link prediction protocols
//! - [`synth`]: planted-community multi-view graph generator
//! - [`embeddings`], [`config`], [`manifest`]: file formats used by the CLI
//! - [`cli`]: the `rgae` commands

pub mod cli;
pub mod config;
pub mod embeddings;
pub mod eval;
pub mod fsio;
pub mod graph;
pub mod manifest;
pub mod model;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod trainer;

pub use graph::{MultiViewNetwork, NodeLabels, NormalizedAdjacency, SparseAdjacency};
pub use model::{EmbeddingSet, LayerSpec, RgaeParams};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
pub use trainer::{TrainConfig, TrainOutput};
