//! Edge-list, node-list and label-file IO.
//!
//! Edge lists hold one `src dst [weight]` triple per line, labels one
//! `node label` pair per line. Blank lines and lines starting with `#` are
//! skipped. Node identifiers are arbitrary whitespace-free strings mapped to
//! contiguous indices in first-appearance order.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::{GraphError, MultiViewNetwork, NodeLabels, Result, SparseAdjacency};
use crate::fsio::write_atomic;

pub const NODES_FILE: &str = "nodes.txt";
pub const LABELS_FILE: &str = "labels.txt";

pub fn view_file_name(view: usize) -> String {
    format!("view_{view}.edges")
}

/// Bidirectional map between external node names and dense indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeIndex {
    names: Vec<String>,
    lookup: HashMap<String, usize>,
}

impl NodeIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> std::result::Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = Self::new();
        for name in names {
            let name = name.into();
            if index.lookup.contains_key(&name) {
                return Err(format!("duplicate node name {name:?}"));
            }
            index.intern(&name);
        }
        Ok(index)
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&i) = self.lookup.get(name) {
            return i;
        }
        let i = self.names.len();
        self.names.push(name.to_owned());
        self.lookup.insert(name.to_owned(), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.lookup.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn into_names(self) -> Vec<String> {
        self.names
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| GraphError::FileError {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let line = line.trim();
        (!line.is_empty() && !line.starts_with('#')).then_some((i + 1, line))
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> GraphError {
    GraphError::ParseError {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads several edge-list files into one network, one view per file.
#[derive(Debug, Clone, Default)]
pub struct EdgeListLoader {
    index: NodeIndex,
    n_hint: Option<usize>,
}

impl EdgeListLoader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Pre-registers node names so their indices follow this order. Nodes
    /// first seen in edge files are appended after them.
    pub fn with_nodes(mut self, index: NodeIndex) -> Self {
        self.index = index;
        self
    }

    /// Expected node count. Loading fails if the files name a different
    /// number of nodes.
    pub fn with_n_hint(mut self, n: usize) -> Self {
        self.n_hint = Some(n);
        self
    }

    pub fn load<P: AsRef<Path>>(self, paths: &[P]) -> Result<MultiViewNetwork> {
        let (net, _) = self.load_with_index(paths)?;
        Ok(net)
    }

    pub fn load_with_index<P: AsRef<Path>>(
        mut self,
        paths: &[P],
    ) -> Result<(MultiViewNetwork, NodeIndex)> {
        let mut raw_views = Vec::with_capacity(paths.len());
        for path in paths {
            let path = path.as_ref();
            let text = read_text(path)?;
            let mut edges = Vec::new();
            for (line_no, line) in content_lines(&text) {
                let mut tokens = line.split_whitespace();
                let (src, dst) = match (tokens.next(), tokens.next()) {
                    (Some(s), Some(d)) => (s, d),
                    _ => return Err(parse_error(path, line_no, "expected `src dst [weight]`")),
                };
                let weight = match tokens.next() {
                    None => 1.0,
                    Some(tok) => {
                        let w: f64 = tok.parse().map_err(|_| {
                            parse_error(path, line_no, format!("invalid weight {tok:?}"))
                        })?;
                        if !w.is_finite() || w <= 0.0 {
                            return Err(parse_error(
                                path,
                                line_no,
                                format!("weight must be positive and finite, got {tok}"),
                            ));
                        }
                        w
                    }
                };
                if tokens.next().is_some() {
                    return Err(parse_error(path, line_no, "trailing tokens after weight"));
                }
                let u = self.index.intern(src);
                let v = self.index.intern(dst);
                if u == v {
                    log::warn!("{}:{line_no}: dropping self-loop on {src}", path.display());
                    continue;
                }
                edges.push((u, v, weight));
            }
            raw_views.push((path.to_path_buf(), edges));
        }

        let n = self.index.len();
        if let Some(hint) = self.n_hint {
            if hint != n {
                return Err(GraphError::NodeCountMismatch {
                    view: 0,
                    expected: hint,
                    found: n,
                });
            }
        }
        let mut views = Vec::with_capacity(raw_views.len());
        for (i, (_path, edges)) in raw_views.into_iter().enumerate() {
            if edges.is_empty() {
                return Err(GraphError::EmptyView(i));
            }
            views.push(SparseAdjacency::from_edges(n, edges)?);
        }
        let net = MultiViewNetwork::new(n, views)?.with_node_names(self.index.names().to_vec())?;
        Ok((net, self.index))
    }
}

/// Reads one view per file; node indices follow first appearance across the
/// files in argument order.
pub fn load_edge_lists<P: AsRef<Path>>(
    paths: &[P],
    n_hint: Option<usize>,
) -> Result<MultiViewNetwork> {
    let mut loader = EdgeListLoader::new();
    if let Some(n) = n_hint {
        loader = loader.with_n_hint(n);
    }
    loader.load(paths)
}

/// Reads a `node label` file against an existing node index. A node listed
/// with several labels makes the result multi-label.
pub fn load_labels(path: &Path, index: &NodeIndex) -> Result<NodeLabels> {
    let text = read_text(path)?;
    let mut class_ids: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut assignments = vec![Vec::new(); index.len()];
    for (line_no, line) in content_lines(&text) {
        let mut tokens = line.split_whitespace();
        let (node, label) = match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(n), Some(l), None) => (n, l),
            _ => return Err(parse_error(path, line_no, "expected `node label`")),
        };
        let node_id = index
            .get(node)
            .ok_or_else(|| parse_error(path, line_no, format!("unknown node {node:?}")))?;
        let class = *class_ids.entry(label.to_owned()).or_insert_with(|| {
            class_names.push(label.to_owned());
            class_names.len() - 1
        });
        assignments[node_id].push(class);
    }
    Ok(NodeLabels::new(class_names, assignments))
}

/// Writes each undirected edge once as `u v` (unit weight) or `u v w`.
pub fn write_edge_list<W: Write + ?Sized>(out: &mut W, view: &SparseAdjacency, names: &[String]) -> io::Result<()> {
    for (u, v, w) in view.edges() {
        if w == 1.0 {
            writeln!(out, "{} {}", names[u], names[v])?;
        } else {
            writeln!(out, "{} {} {}", names[u], names[v], w)?;
        }
    }
    Ok(())
}

pub fn write_labels<W: Write + ?Sized>(out: &mut W, labels: &NodeLabels, names: &[String]) -> io::Result<()> {
    for (node, set) in labels.assignments().iter().enumerate() {
        for &c in set {
            writeln!(out, "{} {}", names[node], labels.class_names()[c])?;
        }
    }
    Ok(())
}

fn io_error(path: PathBuf) -> impl FnOnce(io::Error) -> GraphError {
    move |source| GraphError::FileError { path, source }
}

/// Writes `nodes.txt`, `view_<i>.edges` and, when present, `labels.txt`.
/// The node file pins the index order so loading reproduces the network
/// exactly, isolated nodes included.
pub fn save_dataset(net: &MultiViewNetwork, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_error(dir.to_path_buf()))?;
    let names = net.node_names();
    let nodes_path = dir.join(NODES_FILE);
    write_atomic(&nodes_path, |w| {
        for name in &names {
            writeln!(w, "{name}")?;
        }
        Ok(())
    })
    .map_err(io_error(nodes_path.clone()))?;
    for (i, view) in net.views().iter().enumerate() {
        let path = dir.join(view_file_name(i));
        write_atomic(&path, |w| write_edge_list(w, view, &names)).map_err(io_error(path.clone()))?;
    }
    if let Some(labels) = net.labels() {
        let path = dir.join(LABELS_FILE);
        write_atomic(&path, |w| write_labels(w, labels, &names)).map_err(io_error(path.clone()))?;
    }
    Ok(())
}

/// View files present in `dir`, in index order.
pub fn dataset_view_files(dir: &Path) -> Vec<PathBuf> {
    (0..)
        .map(|i| dir.join(view_file_name(i)))
        .take_while(|p| p.is_file())
        .collect()
}

/// Inverse of [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<MultiViewNetwork> {
    let mut loader = EdgeListLoader::new();
    let nodes_path = dir.join(NODES_FILE);
    if nodes_path.is_file() {
        let text = read_text(&nodes_path)?;
        let mut index = NodeIndex::new();
        for (line_no, line) in content_lines(&text) {
            if index.get(line).is_some() {
                return Err(parse_error(&nodes_path, line_no, format!("duplicate node {line:?}")));
            }
            index.intern(line);
        }
        let n = index.len();
        loader = loader.with_nodes(index).with_n_hint(n);
    }
    let files = dataset_view_files(dir);
    if files.is_empty() {
        return Err(GraphError::FileError {
            path: dir.join(view_file_name(0)),
            source: io::Error::new(io::ErrorKind::NotFound, "dataset has no view files"),
        });
    }
    let (mut net, index) = loader.load_with_index(&files)?;
    let labels_path = dir.join(LABELS_FILE);
    if labels_path.is_file() {
        let labels = load_labels(&labels_path, &index)?;
        net = net.with_labels(labels)?;
    }
    Ok(net)
}
