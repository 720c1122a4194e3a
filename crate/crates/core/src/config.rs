//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments
//! override earlier ones, and command-line flags are applied on top through
//! [`KeyValues::set`]. Keys under `run.`, `input.`, `output.` and `version.` are
//! bookkeeping written by run manifests and are skipped by the typed
//! readers, so a manifest can be fed back in as a config.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::model::Ablation;
use crate::synth::SynthConfig;
use crate::trainer::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("key {key:?}: cannot parse {value:?}: {message}")]
    Value { key: String, value: String, message: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

const BOOKKEEPING_PREFIXES: [&str; 4] = ["run.", "input.", "output.", "version."];

pub const TRAIN_KEYS: [&str; 12] = [
    "dim",
    "layers",
    "alpha",
    "beta",
    "gamma",
    "lr",
    "epochs",
    "patience",
    "tol",
    "seed",
    "ablate",
    "lambda_update_every",
];

pub const SYNTH_KEYS: [&str; 8] = ["n", "blocks", "views", "p_in", "p_out", "unique_frac", "overlap", "seed"];

/// Evaluation and dataset keys shared by several commands.
pub const RUN_KEYS: [&str; 3] = ["data", "train_ratio", "target_view"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = Self::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_owned(),
                });
            };
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_owned(),
                });
            }
            kv.set(k, v.trim());
        }
        Ok(kv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_owned(), value.to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Overlays `other`; its values win.
    pub fn merge(&mut self, other: &KeyValues) {
        for (k, v) in other.iter() {
            self.set(k, v);
        }
    }

    /// Parsed value of `key`, if present.
    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.to_owned(),
                    value: v.to_owned(),
                    message: e.to_string(),
                })
            })
            .transpose()
    }

    /// Comma-separated list value of `key`, if present.
    pub fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        self.get(key).map(|v| parse_list(key, v)).transpose()
    }

    /// Fails on any key outside `allowed` that is not bookkeeping.
    pub fn check_keys(&self, allowed: &[&[&str]]) -> Result<()> {
        for k in self.entries.keys() {
            let known = allowed.iter().any(|set| set.contains(&k.as_str()))
                || BOOKKEEPING_PREFIXES.iter().any(|p| k.starts_with(p));
            if !known {
                return Err(ConfigError::UnknownKey(k.clone()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub fn parse_list<T>(key: &str, value: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>().map_err(|e| ConfigError::Value {
                key: key.to_owned(),
                value: value.to_owned(),
                message: e.to_string(),
            })
        })
        .collect()
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// `TrainConfig::default()` with any present train keys applied.
pub fn train_config(kv: &KeyValues) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    if let Some(v) = kv.parsed("dim")? {
        cfg.total_dim = v;
    }
    if let Some(v) = kv.list("layers")? {
        cfg.hidden = v;
    }
    if let Some(v) = kv.parsed("alpha")? {
        cfg.alpha = v;
    }
    if let Some(v) = kv.parsed("beta")? {
        cfg.beta = v;
    }
    if let Some(v) = kv.parsed("gamma")? {
        cfg.gamma = v;
    }
    if let Some(v) = kv.parsed("lr")? {
        cfg.lr = v;
    }
    if let Some(v) = kv.parsed("epochs")? {
        cfg.max_epochs = v;
    }
    if let Some(v) = kv.get("patience") {
        cfg.patience = match v {
            "none" => None,
            _ => kv.parsed("patience")?,
        };
    }
    if let Some(v) = kv.parsed("tol")? {
        cfg.tol = v;
    }
    if let Some(v) = kv.parsed("seed")? {
        cfg.seed = v;
    }
    if let Some(v) = kv.parsed::<Ablation>("ablate")? {
        cfg.ablation = v;
    }
    if let Some(v) = kv.parsed("lambda_update_every")? {
        cfg.lambda_update_every = v;
    }
    Ok(cfg)
}

/// Every train key with its resolved value. `train_config` of the result
/// gives back `cfg`.
pub fn train_config_entries(cfg: &TrainConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("dim", cfg.total_dim);
    kv.set("layers", join(&cfg.hidden));
    kv.set("alpha", cfg.alpha);
    kv.set("beta", cfg.beta);
    kv.set("gamma", cfg.gamma);
    kv.set("lr", cfg.lr);
    kv.set("epochs", cfg.max_epochs);
    kv.set("patience", cfg.patience.map_or("none".to_owned(), |p| p.to_string()));
    kv.set("tol", cfg.tol);
    kv.set("seed", cfg.seed);
    kv.set("ablate", cfg.ablation);
    kv.set("lambda_update_every", cfg.lambda_update_every);
    kv
}

/// `SynthConfig::default()` with any present synth keys applied. Setting
/// `n` without `blocks` keeps the default number of communities, balanced.
pub fn synth_config(kv: &KeyValues) -> Result<SynthConfig> {
    let mut cfg = SynthConfig::default();
    if let Some(n) = kv.parsed("n")? {
        cfg.n = n;
        cfg.block_sizes = SynthConfig::balanced_blocks(n, cfg.block_sizes.len());
    }
    if let Some(v) = kv.list("blocks")? {
        cfg.block_sizes = v;
    }
    if let Some(v) = kv.parsed("views")? {
        cfg.views = v;
    }
    if let Some(v) = kv.parsed("p_in")? {
        cfg.p_in = v;
    }
    if let Some(v) = kv.parsed("p_out")? {
        cfg.p_out = v;
    }
    if let Some(v) = kv.parsed("unique_frac")? {
        cfg.unique_frac = v;
    }
    if let Some(v) = kv.get("overlap") {
        cfg.overlap = match v {
            "none" => None,
            _ => kv.parsed("overlap")?,
        };
    }
    if let Some(v) = kv.parsed("seed")? {
        cfg.seed = v;
    }
    Ok(cfg)
}

pub fn synth_config_entries(cfg: &SynthConfig) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("n", cfg.n);
    kv.set("blocks", join(&cfg.block_sizes));
    kv.set("views", cfg.views);
    kv.set("p_in", cfg.p_in);
    kv.set("p_out", cfg.p_out);
    kv.set("unique_frac", cfg.unique_frac);
    kv.set("overlap", cfg.overlap.map_or("none".to_owned(), |j| j.to_string()));
    kv.set("seed", cfg.seed);
    kv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_with_comments_and_overrides() {
        let mut kv = KeyValues::parse("# run\nalpha = 0.3\n\nlayers=64, 32\nalpha=0.7\n").unwrap();
        assert_eq!(kv.get("alpha"), Some("0.7"));
        kv.set("alpha", 1.5);
        let cfg = train_config(&kv).unwrap();
        assert_eq!(cfg.alpha, 1.5);
        assert_eq!(cfg.hidden, vec![64, 32]);
        assert_eq!(cfg.beta, TrainConfig::default().beta);
    }

    #[test]
    fn syntax_and_value_errors() {
        assert!(matches!(KeyValues::parse("alpha 0.3"), Err(ConfigError::Syntax { line: 1, .. })));
        let kv = KeyValues::parse("gamma = fast").unwrap();
        assert!(matches!(train_config(&kv), Err(ConfigError::Value { .. })));
        let kv = KeyValues::parse("colour = red\ninput.view_0.sha256 = ab").unwrap();
        assert!(matches!(kv.check_keys(&[&TRAIN_KEYS]), Err(ConfigError::UnknownKey(k)) if k == "colour"));
    }

    #[test]
    fn train_entries_round_trip() {
        let cfg = TrainConfig {
            gamma: 0.05,
            lr: 0.1 + 0.2,
            patience: None,
            ablation: Ablation::NO_DIF,
            ..TrainConfig::default()
        };
        let text = train_config_entries(&cfg).to_string();
        assert_eq!(train_config(&KeyValues::parse(&text).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn synth_entries_round_trip() {
        let cfg = SynthConfig {
            n: 31,
            block_sizes: vec![10, 21],
            overlap: Some(0.4),
            ..SynthConfig::default()
        };
        let text = synth_config_entries(&cfg).to_string();
        assert_eq!(synth_config(&KeyValues::parse(&text).unwrap()).unwrap(), cfg);
    }

    #[test]
    fn n_alone_rebalances_blocks() {
        let kv = KeyValues::parse("n = 31").unwrap();
        assert_eq!(synth_config(&kv).unwrap().block_sizes, vec![11, 10, 10]);
    }
}
