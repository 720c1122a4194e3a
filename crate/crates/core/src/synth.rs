//! Planted-community multi-view graphs.
//!
//! All views share one stochastic-block-model backbone. Each view then adds
//! its own edges, drawn from a block model over a view-specific random
//! reassignment of nodes to blocks: structured within the view, unrelated to
//! the true communities and to the other views.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{GraphError, MultiViewNetwork, NodeLabels, SparseAdjacency};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n: usize,
    /// Community sizes; must sum to `n`.
    pub block_sizes: Vec<usize>,
    pub views: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// View-specific edges per view, as a fraction of the backbone size.
    pub unique_frac: f64,
    /// Target pairwise Jaccard level. When set it replaces `unique_frac`
    /// with the value that yields this overlap in expectation.
    pub overlap: Option<f64>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 60,
            block_sizes: vec![20, 20, 20],
            views: 2,
            p_in: 0.3,
            p_out: 0.02,
            unique_frac: 0.5,
            overlap: None,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// `k` equal blocks (the remainder goes to the first blocks).
    pub fn balanced_blocks(n: usize, k: usize) -> Vec<usize> {
        (0..k).map(|i| n / k + usize::from(i < n % k)).collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.n < 2 {
            return bad(format!("need at least 2 nodes, got {}", self.n));
        }
        if self.block_sizes.is_empty() || self.block_sizes.contains(&0) {
            return bad(format!("block sizes must be positive: {:?}", self.block_sizes));
        }
        if self.block_sizes.iter().sum::<usize>() != self.n {
            return bad(format!("block sizes {:?} do not sum to n = {}", self.block_sizes, self.n));
        }
        if self.views == 0 {
            return bad("need at least one view".into());
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return bad(format!("need 0 <= p_out < p_in <= 1, got p_in = {}, p_out = {}", self.p_in, self.p_out));
        }
        if !(self.unique_frac >= 0.0 && self.unique_frac.is_finite()) {
            return bad(format!("unique_frac must be >= 0, got {}", self.unique_frac));
        }
        if let Some(j) = self.overlap {
            if !(j > 0.0 && j <= 1.0) {
                return bad(format!("overlap must lie in (0, 1], got {j}"));
            }
        }
        Ok(())
    }

    /// Unique-edge fraction in effect after applying `overlap`.
    pub fn effective_unique_frac(&self) -> f64 {
        match self.overlap {
            // J = b / (b + 2u)  =>  u / b = (1/J - 1) / 2
            Some(j) => (1.0 / j - 1.0) / 2.0,
            None => self.unique_frac,
        }
    }

    /// Community id of every node (contiguous blocks).
    pub fn communities(&self) -> Vec<usize> {
        self.block_sizes
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
            .collect()
    }
}

/// Generated network plus the pieces tests and analyses need.
#[derive(Debug, Clone)]
pub struct SynthNetwork {
    pub network: MultiViewNetwork,
    pub backbone: Vec<(usize, usize)>,
    pub unique: Vec<Vec<(usize, usize)>>,
}

pub fn generate(cfg: &SynthConfig) -> Result<MultiViewNetwork, SynthError> {
    Ok(generate_detailed(cfg)?.network)
}

pub fn generate_detailed(cfg: &SynthConfig) -> Result<SynthNetwork, SynthError> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let community = cfg.communities();

    let mut in_backbone = vec![false; n * n];
    let mut backbone = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if community[u] == community[v] { cfg.p_in } else { cfg.p_out };
            if rng.gen::<f64>() < p {
                backbone.push((u, v));
                in_backbone[u * n + v] = true;
            }
        }
    }
    if backbone.is_empty() {
        return Err(SynthError::Config("backbone came out empty; raise p_in or n".into()));
    }

    let frac = cfg.effective_unique_frac();
    let target = (frac * backbone.len() as f64).round() as usize;
    let mut unique = Vec::with_capacity(cfg.views);
    let mut views = Vec::with_capacity(cfg.views);
    for view in 0..cfg.views {
        // View-specific reassignment of nodes to blocks of the same sizes.
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut relabel = vec![0; n];
        for (pos, &node) in order.iter().enumerate() {
            relabel[node] = community[pos];
        }
        // Weighted sampling without replacement (exponential keys).
        let mut keyed: Vec<(f64, usize, usize)> = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let draw: f64 = rng.gen();
                if in_backbone[u * n + v] {
                    continue;
                }
                let w = if relabel[u] == relabel[v] { cfg.p_in } else { cfg.p_out };
                if w > 0.0 {
                    keyed.push((draw.max(f64::MIN_POSITIVE).ln() / w, u, v));
                }
            }
        }
        if target > keyed.len() {
            log::warn!(
                "view {view}: only {} candidate pairs for {target} unique edges",
                keyed.len()
            );
        }
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
        let mut extra: Vec<(usize, usize)> = keyed.into_iter().take(target).map(|(_, u, v)| (u, v)).collect();
        extra.sort_unstable();
        let edges = backbone.iter().chain(&extra).copied();
        views.push(SparseAdjacency::from_edges(n, edges.map(|(u, v)| (u, v, 1.0)))?);
        unique.push(extra);
    }

    let network = MultiViewNetwork::new(n, views)?.with_labels(NodeLabels::from_classes(&community))?;
    Ok(SynthNetwork {
        network,
        backbone,
        unique,
    })
}

/// `|backbone| / (|backbone| + u_i + u_j)` with `u = unique_frac · |backbone|`,
/// ignoring coincidences between different views' unique edges.
pub fn expected_pairwise_jaccard(unique_frac: f64) -> f64 {
    1.0 / (1.0 + 2.0 * unique_frac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::jaccard_consistency;

    #[test]
    fn no_unique_edges_means_identical_views() {
        let cfg = SynthConfig {
            unique_frac: 0.0,
            views: 3,
            ..SynthConfig::default()
        };
        let net = generate(&cfg).unwrap();
        assert_eq!(net.view(0), net.view(1));
        assert_eq!(net.view(1), net.view(2));
        let j = jaccard_consistency(&net).unwrap();
        assert!(j.data().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn single_dense_block_is_a_clique() {
        let cfg = SynthConfig {
            n: 7,
            block_sizes: vec![7],
            views: 2,
            p_in: 1.0,
            p_out: 0.0,
            unique_frac: 0.0,
            overlap: None,
            seed: 1,
        };
        let net = generate(&cfg).unwrap();
        for v in net.views() {
            assert_eq!(v.edge_count(), 21);
        }
    }

    #[test]
    fn backbone_is_in_every_view_and_labels_match_blocks() {
        let cfg = SynthConfig {
            n: 30,
            block_sizes: vec![10, 12, 8],
            views: 3,
            ..SynthConfig::default()
        };
        let s = generate_detailed(&cfg).unwrap();
        for view in s.network.views() {
            for &(u, v) in &s.backbone {
                assert!(view.has_edge(u, v));
            }
            for u in 0..30 {
                assert!(!view.has_edge(u, u));
            }
        }
        let labels = s.network.labels().unwrap();
        let mut counts = [0usize; 3];
        for set in labels.assignments() {
            counts[set[0]] += 1;
        }
        assert_eq!(counts, [10, 12, 8]);
        let b = s.backbone.len() as f64;
        for u in &s.unique {
            assert_eq!(u.len(), (0.5 * b).round() as usize);
        }
    }

    #[test]
    fn same_seed_same_edges() {
        let cfg = SynthConfig::default();
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig { seed: 8, ..cfg.clone() };
        assert_ne!(generate(&cfg).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn config_errors() {
        let base = SynthConfig::default();
        let bad = [
            SynthConfig { block_sizes: vec![20, 20], ..base.clone() },
            SynthConfig { p_out: 0.5, p_in: 0.3, ..base.clone() },
            SynthConfig { unique_frac: -1.0, ..base.clone() },
            SynthConfig { views: 0, ..base.clone() },
            SynthConfig { overlap: Some(0.0), ..base.clone() },
        ];
        for cfg in bad {
            assert!(matches!(generate(&cfg), Err(SynthError::Config(_))));
        }
    }

    #[test]
    fn overlap_sets_unique_fraction() {
        let cfg = SynthConfig {
            overlap: Some(0.5),
            ..SynthConfig::default()
        };
        assert!((cfg.effective_unique_frac() - 0.5).abs() < 1e-15);
        assert!((expected_pairwise_jaccard(0.5) - 0.5).abs() < 1e-15);
    }
}
