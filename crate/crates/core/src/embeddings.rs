//! Text embedding files.
//!
//! ```text
//! n d_total |V| d
//! <name> <x_1> ... <x_d_total>
//! ```
//!
//! Values are printed with 17 significant digits so reading a file back
//! reproduces every `f64` exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fsio::write_atomic;
use crate::tensor::Tensor;

#[derive(Debug, Error)]
pub enum EmbeddingFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Final embedding matrix with node names and its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFile {
    pub names: Vec<String>,
    pub matrix: Tensor,
    pub num_views: usize,
    pub block_dim: usize,
}

impl EmbeddingFile {
    pub fn new(names: Vec<String>, matrix: Tensor, num_views: usize, block_dim: usize) -> Result<Self, EmbeddingFileError> {
        if names.len() != matrix.rows() {
            return Err(EmbeddingFileError::Invalid(format!(
                "{} names for {} rows",
                names.len(),
                matrix.rows()
            )));
        }
        if (num_views + 1) * block_dim != matrix.cols() {
            return Err(EmbeddingFileError::Invalid(format!(
                "{} columns do not split into {} blocks of {block_dim}",
                matrix.cols(),
                num_views + 1
            )));
        }
        if let Some(bad) = names.iter().find(|s| s.is_empty() || s.contains(char::is_whitespace)) {
            return Err(EmbeddingFileError::Invalid(format!("node name {bad:?} is empty or has whitespace")));
        }
        Ok(Self {
            names,
            matrix,
            num_views,
            block_dim,
        })
    }

    pub fn write_to(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(
            out,
            "{} {} {} {}",
            self.matrix.rows(),
            self.matrix.cols(),
            self.num_views,
            self.block_dim
        )?;
        for (name, row) in self.names.iter().zip(0..) {
            write!(out, "{name}")?;
            for x in self.matrix.row(row) {
                write!(out, " {x:.16e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbeddingFileError> {
        write_atomic(path, |w| self.write_to(w)).map_err(|source| EmbeddingFileError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, EmbeddingFileError> {
        let text = fs::read_to_string(path).map_err(|source| EmbeddingFileError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self, EmbeddingFileError> {
        let err = |line: usize, message: String| EmbeddingFileError::Parse {
            path: path.to_owned(),
            line,
            message,
        };
        let mut lines = text.lines();
        let header: Vec<usize> = lines
            .next()
            .ok_or_else(|| err(1, "empty file".into()))?
            .split_whitespace()
            .map(|f| f.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(1, format!("bad header: {e}")))?;
        let [n, d_total, num_views, block_dim] = header[..] else {
            return Err(err(1, "header must be `n d_total |V| d`".into()));
        };
        let mut names = Vec::with_capacity(n);
        let mut data = Vec::with_capacity(n * d_total);
        for (k, line) in lines.enumerate() {
            let lineno = k + 2;
            let mut fields = line.split_whitespace();
            let Some(name) = fields.next() else {
                return Err(err(lineno, "blank line".into()));
            };
            names.push(name.to_owned());
            let before = data.len();
            for f in fields {
                data.push(f.parse::<f64>().map_err(|e| err(lineno, format!("{f:?}: {e}")))?);
            }
            if data.len() - before != d_total {
                return Err(err(lineno, format!("expected {d_total} values, found {}", data.len() - before)));
            }
        }
        if names.len() != n {
            return Err(err(names.len() + 1, format!("header declares {n} nodes, found {}", names.len())));
        }
        let matrix = Tensor::from_vec(n, d_total, data).map_err(|e| EmbeddingFileError::Invalid(e.to_string()))?;
        Self::new(names, matrix, num_views, block_dim)
    }
}
