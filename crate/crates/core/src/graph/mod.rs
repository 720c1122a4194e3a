//! Sparse multi-view graph model.
//!
//! Every view is stored as a CSR [`SparseAdjacency`] without self-loops. The
//! propagation matrix `D̃^{-1/2} (A + I) D̃^{-1/2}` used by the GCN layers is
//! produced by [`normalize`] and multiplied against dense matrices by [`spmm`].

mod io;

use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

pub use io::{
    dataset_view_files, load_dataset, load_edge_lists, load_labels, save_dataset,
    view_file_name, write_edge_list, write_labels, EdgeListLoader, NodeIndex, LABELS_FILE,
    NODES_FILE,
};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({row}, {col}) has no mirror entry with equal weight")]
    NonSymmetric { row: usize, col: usize },
    #[error("malformed CSR structure: {0}")]
    IndexOutOfRange(String),
    #[error("self-loop at node {0} must not be stored")]
    SelfLoop(usize),
    #[error("consistency analysis needs at least two views, got {0}")]
    SingleView(usize),
    #[error("view {0} has no edges")]
    EmptyView(usize),
    #[error("network needs at least one view")]
    NoViews,
    #[error("view {view} has {found} nodes, expected {expected}")]
    NodeCountMismatch {
        view: usize,
        expected: usize,
        found: usize,
    },
    #[error("cannot read {path}: {source}")]
    FileError {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    ParseError {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// Adjacency matrix of one view in CSR form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    is_symmetric: bool,
}

impl SparseAdjacency {
    /// Builds a symmetric adjacency from undirected weighted edges.
    ///
    /// Each edge is inserted in both directions. Repeated pairs collapse to a
    /// single entry holding the largest weight, and self-loops are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(GraphError::IndexOutOfRange(format!(
                    "edge ({u}, {v}) in a graph with {n} nodes"
                )));
            }
            if u == v {
                continue;
            }
            rows[u].push((v, w));
            rows[v].push((u, w));
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for mut row in rows {
            row.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let mut i = 0;
            while i < row.len() {
                let col = row[i].0;
                let mut w = row[i].1;
                while i + 1 < row.len() && row[i + 1].0 == col {
                    i += 1;
                    w = w.max(row[i].1);
                }
                col_indices.push(col);
                values.push(w);
                i += 1;
            }
            row_offsets.push(col_indices.len());
        }
        Ok(Self {
            n,
            row_offsets,
            col_indices,
            values,
            is_symmetric: true,
        })
    }

    /// Unit-weight convenience wrapper around [`SparseAdjacency::from_edges`].
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::from_edges(n, pairs.iter().map(|&(u, v)| (u, v, 1.0)))
    }

    /// Wraps raw CSR arrays after validating them. With `is_symmetric` set the
    /// mirror of every entry is checked as well.
    pub fn from_csr(
        n: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
        is_symmetric: bool,
    ) -> Result<Self> {
        validate_csr(n, &row_offsets, &col_indices, values.len(), false)?;
        let adj = Self {
            n,
            row_offsets,
            col_indices,
            values,
            is_symmetric,
        };
        if is_symmetric {
            adj.check_mirrors()?;
        }
        Ok(adj)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        if self.is_symmetric {
            self.nnz() / 2
        } else {
            self.nnz()
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_symmetric
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(column, weight)` entries of row `u` in increasing column order.
    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.row_offsets[u + 1] - self.row_offsets[u]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<f64> {
        let cols = self.neighbors(u);
        cols.binary_search(&v)
            .ok()
            .map(|k| self.values[self.row_offsets[u] + k])
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.weight(u, v).is_some()
    }

    /// Undirected edges `(u, v, w)` with `u < v`, in CSR order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.row(u)
                .filter(move |&(v, _)| v > u)
                .map(move |(v, w)| (u, v, w))
        })
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n, self.n);
        for u in 0..self.n {
            for (v, w) in self.row(u) {
                t.set(u, v, w);
            }
        }
        t
    }

    fn check_mirrors(&self) -> Result<()> {
        for u in 0..self.n {
            for (v, w) in self.row(u) {
                if self.weight(v, u) != Some(w) {
                    return Err(GraphError::NonSymmetric { row: u, col: v });
                }
            }
        }
        Ok(())
    }
}

fn validate_csr(
    n: usize,
    row_offsets: &[usize],
    col_indices: &[usize],
    n_values: usize,
    allow_diagonal: bool,
) -> Result<()> {
    let bad = |msg: String| Err(GraphError::IndexOutOfRange(msg));
    if row_offsets.len() != n + 1 {
        return bad(format!(
            "{} row offsets for {n} rows",
            row_offsets.len()
        ));
    }
    if row_offsets[0] != 0 || row_offsets[n] != col_indices.len() {
        return bad("row offsets do not span the column array".into());
    }
    if n_values != col_indices.len() {
        return bad(format!(
            "{n_values} values for {} column indices",
            col_indices.len()
        ));
    }
    for u in 0..n {
        let (start, end) = (row_offsets[u], row_offsets[u + 1]);
        if start > end {
            return bad(format!("row {u} has decreasing offsets"));
        }
        let cols = &col_indices[start..end];
        for (k, &c) in cols.iter().enumerate() {
            if c >= n {
                return bad(format!("column {c} in row {u} exceeds {n}"));
            }
            if k > 0 && cols[k - 1] >= c {
                return bad(format!("columns of row {u} are not strictly increasing"));
            }
            if c == u && !allow_diagonal {
                return Err(GraphError::SelfLoop(u));
            }
        }
    }
    Ok(())
}

/// Symmetrically normalized adjacency with self-loops,
/// `D̃^{-1/2} (A + I) D̃^{-1/2}`. Same CSR layout as [`SparseAdjacency`] with
/// the diagonal entries present.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    n: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl NormalizedAdjacency {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, u: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_offsets[u]..self.row_offsets[u + 1];
        self.col_indices[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        let cols = &self.col_indices[self.row_offsets[u]..self.row_offsets[u + 1]];
        cols.binary_search(&v)
            .map(|k| self.values[self.row_offsets[u] + k])
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> Tensor {
        let mut t = Tensor::zeros(self.n, self.n);
        for u in 0..self.n {
            for (v, w) in self.row(u) {
                t.set(u, v, w);
            }
        }
        t
    }
}

/// Adds self-loops and applies the two-sided degree scaling.
pub fn normalize(adj: &SparseAdjacency) -> Result<NormalizedAdjacency> {
    validate_csr(
        adj.n,
        &adj.row_offsets,
        &adj.col_indices,
        adj.values.len(),
        false,
    )?;
    // The flag is not trusted: the mirror check is what makes the output
    // exactly symmetric.
    adj.check_mirrors()?;

    let n = adj.n;
    let degree: Vec<f64> = (0..n)
        .map(|u| 1.0 + adj.row(u).map(|(_, w)| w).sum::<f64>())
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(adj.nnz() + n);
    let mut values = Vec::with_capacity(adj.nnz() + n);
    row_offsets.push(0);
    for u in 0..n {
        let mut diagonal_done = false;
        for (v, w) in adj.row(u) {
            if !diagonal_done && v > u {
                col_indices.push(u);
                values.push(1.0 / degree[u]);
                diagonal_done = true;
            }
            col_indices.push(v);
            // d_u * d_v is commutative in IEEE arithmetic, so (u, v) and
            // (v, u) receive bit-identical values.
            values.push(w / (degree[u] * degree[v]).sqrt());
        }
        if !diagonal_done {
            col_indices.push(u);
            values.push(1.0 / degree[u]);
        }
        row_offsets.push(col_indices.len());
    }
    Ok(NormalizedAdjacency {
        n,
        row_offsets,
        col_indices,
        values,
    })
}

/// Sparse-dense product `norm · dense`. Each output row accumulates the CSR
/// entries of its row in storage order.
pub fn spmm(norm: &NormalizedAdjacency, dense: &Tensor) -> std::result::Result<Tensor, TensorError> {
    if dense.rows() != norm.n {
        return Err(TensorError::ShapeMismatch {
            op: "spmm",
            left: (norm.n, norm.n),
            right: dense.shape(),
        });
    }
    let m = dense.cols();
    let mut out = Tensor::zeros(norm.n, m);
    for u in 0..norm.n {
        let out_row = out.row_mut(u);
        for (v, w) in norm.row(u) {
            for (o, x) in out_row.iter_mut().zip(dense.row(v)) {
                *o += w * x;
            }
        }
    }
    Ok(out)
}

/// Per-node label sets. Multi-class data has exactly one label per labelled
/// node; multi-label data may have several. Nodes without labels carry an
/// empty set and are skipped by the evaluator.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLabels {
    class_names: Vec<String>,
    assignments: Vec<Vec<usize>>,
    multi_label: bool,
}

impl NodeLabels {
    pub fn new(class_names: Vec<String>, mut assignments: Vec<Vec<usize>>) -> Self {
        for set in &mut assignments {
            set.sort_unstable();
            set.dedup();
        }
        let multi_label = assignments.iter().any(|s| s.len() > 1);
        Self {
            class_names,
            assignments,
            multi_label,
        }
    }

    /// Single-label assignment with class names `"0".."k"`.
    pub fn from_classes(classes: &[usize]) -> Self {
        let k = classes.iter().copied().max().map_or(0, |m| m + 1);
        Self::new(
            (0..k).map(|c| c.to_string()).collect(),
            classes.iter().map(|&c| vec![c]).collect(),
        )
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn of(&self, node: usize) -> &[usize] {
        &self.assignments[node]
    }

    pub fn is_multi_label(&self) -> bool {
        self.multi_label
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Shared node set with one adjacency per view.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewNetwork {
    n: usize,
    views: Vec<SparseAdjacency>,
    labels: Option<NodeLabels>,
    node_names: Option<Vec<String>>,
}

impl MultiViewNetwork {
    pub fn new(n: usize, views: Vec<SparseAdjacency>) -> Result<Self> {
        if views.is_empty() {
            return Err(GraphError::NoViews);
        }
        for (i, v) in views.iter().enumerate() {
            if v.n() != n {
                return Err(GraphError::NodeCountMismatch {
                    view: i,
                    expected: n,
                    found: v.n(),
                });
            }
            if v.nnz() == 0 {
                return Err(GraphError::EmptyView(i));
            }
        }
        Ok(Self {
            n,
            views,
            labels: None,
            node_names: None,
        })
    }

    pub fn with_labels(mut self, labels: NodeLabels) -> Result<Self> {
        if labels.len() != self.n {
            return Err(GraphError::IndexOutOfRange(format!(
                "{} label sets for {} nodes",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_node_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n {
            return Err(GraphError::IndexOutOfRange(format!(
                "{} node names for {} nodes",
                names.len(),
                self.n
            )));
        }
        self.node_names = Some(names);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn views(&self) -> &[SparseAdjacency] {
        &self.views
    }

    pub fn view(&self, i: usize) -> &SparseAdjacency {
        &self.views[i]
    }

    pub fn labels(&self) -> Option<&NodeLabels> {
        self.labels.as_ref()
    }

    pub fn explicit_node_names(&self) -> Option<&[String]> {
        self.node_names.as_deref()
    }

    /// External identifier of every node; defaults to the index.
    pub fn node_names(&self) -> Vec<String> {
        match &self.node_names {
            Some(names) => names.clone(),
            None => (0..self.n).map(|i| i.to_string()).collect(),
        }
    }

    /// Copy of the network keeping only the views in `keep`, in that order.
    pub fn select_views(&self, keep: &[usize]) -> Result<Self> {
        let views = keep
            .iter()
            .map(|&i| {
                self.views.get(i).cloned().ok_or_else(|| {
                    GraphError::IndexOutOfRange(format!(
                        "view {i} of {}",
                        self.views.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = Self::new(self.n, views)?;
        out.labels = self.labels.clone();
        out.node_names = self.node_names.clone();
        Ok(out)
    }

    /// Copy without view `held_out`, used when that view is the link
    /// prediction target.
    pub fn without_view(&self, held_out: usize) -> Result<Self> {
        if held_out >= self.num_views() {
            return Err(GraphError::IndexOutOfRange(format!(
                "view {held_out} of {}",
                self.num_views()
            )));
        }
        let keep: Vec<usize> = (0..self.num_views()).filter(|&i| i != held_out).collect();
        self.select_views(&keep)
    }
}

/// Pairwise Jaccard coefficient `|E_i ∩ E_j| / |E_i ∪ E_j|` over unordered
/// node pairs. Returns a symmetric `|V| x |V|` matrix with a unit diagonal.
pub fn jaccard_consistency(net: &MultiViewNetwork) -> Result<Tensor> {
    let k = net.num_views();
    if k < 2 {
        return Err(GraphError::SingleView(k));
    }
    let mut out = Tensor::identity(k);
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = (net.view(i), net.view(j));
            let mut shared = 0usize;
            for u in 0..net.n() {
                shared += sorted_intersection_above(a.neighbors(u), b.neighbors(u), u);
            }
            let union = a.edge_count() + b.edge_count() - shared;
            let jac = if union == 0 {
                1.0
            } else {
                shared as f64 / union as f64
            };
            out.set(i, j, jac);
            out.set(j, i, jac);
        }
    }
    Ok(out)
}

fn sorted_intersection_above(a: &[usize], b: &[usize], floor: usize) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                if a[i] > floor {
                    count += 1;
                }
                i += 1;
                j += 1;
            }
        }
    }
    count
}
