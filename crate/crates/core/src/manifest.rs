//! Run manifests written next to every command's outputs.
//!
//! A manifest is a [`KeyValues`] file: the fully resolved configuration,
//! then `run.*`, `input.*`, `output.*` and `version.*` bookkeeping. It holds
//! no timestamps or host details, so identical runs write identical
//! manifests, and it can be passed back through `--config` to repeat a run.

use std::path::{Path, PathBuf};

use crate::config::{ConfigError, KeyValues};
use crate::fsio::{sha256_file, write_atomic};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    /// Resolved configuration with every default materialized.
    pub config: KeyValues,
    /// Input files by role with their SHA-256 digests.
    pub inputs: Vec<(String, PathBuf, String)>,
    /// Output files by role.
    pub outputs: Vec<(String, PathBuf)>,
}

impl RunManifest {
    pub fn new(command: &str, config: KeyValues) -> Self {
        Self {
            command: command.to_owned(),
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Records `path` with its digest under `role`.
    pub fn add_input(&mut self, role: &str, path: &Path) -> std::io::Result<()> {
        let digest = sha256_file(path)?;
        self.inputs.push((role.to_owned(), path.to_owned(), digest));
        Ok(())
    }

    pub fn add_output(&mut self, role: &str, path: &Path) {
        self.outputs.push((role.to_owned(), path.to_owned()));
    }

    pub fn seed(&self) -> Option<&str> {
        self.config.get("seed")
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = self.config.clone();
        kv.set("run.command", &self.command);
        kv.set("version.rgae", env!("CARGO_PKG_VERSION"));
        for (role, path, digest) in &self.inputs {
            kv.set(&format!("input.{role}.path"), path.display());
            kv.set(&format!("input.{role}.sha256"), digest);
        }
        for (role, path) in &self.outputs {
            kv.set(&format!("output.{role}"), path.display());
        }
        kv
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let text = self.to_key_values().to_string();
        write_atomic(path, |w| w.write_all(text.as_bytes()))
    }

    /// Splits a manifest file back into its parts.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let kv = KeyValues::load(path)?;
        let mut manifest = RunManifest::new(kv.get("run.command").unwrap_or(""), KeyValues::new());
        let mut digests = Vec::new();
        for (k, v) in kv.iter() {
            if let Some(rest) = k.strip_prefix("input.") {
                if let Some(role) = rest.strip_suffix(".sha256") {
                    digests.push((role.to_owned(), v.to_owned()));
                }
            } else if let Some(role) = k.strip_prefix("output.") {
                manifest.outputs.push((role.to_owned(), PathBuf::from(v)));
            } else if !k.starts_with("run.") && !k.starts_with("version.") {
                manifest.config.set(k, v);
            }
        }
        for (role, digest) in digests {
            let path = kv.get(&format!("input.{role}.path")).unwrap_or("");
            manifest.inputs.push((role, PathBuf::from(path), digest));
        }
        Ok(manifest)
    }

    /// Inputs whose current digest differs from the recorded one.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(_, path, digest)| sha256_file(path).map_or(true, |d| &d != digest))
            .map(|(role, _, _)| role.clone())
            .collect()
    }
}
