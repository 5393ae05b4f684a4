use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use trajsense::{Error, Result};

/// Record of one stage invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Option<String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub parameters: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: Option<&Path>) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            seed,
            config: config.map(|p| p.display().to_string()),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            parameters: BTreeMap::new(),
        }
    }

    /// Registers an input, failing when it does not exist.
    pub fn input(&mut self, name: &str, path: &Path) -> Result<PathBuf> {
        if !path.exists() {
            return Err(Error::Lookup(format!("{name} input {} does not exist", path.display())));
        }
        self.inputs.insert(name.to_owned(), path.display().to_string());
        Ok(path.to_path_buf())
    }

    pub fn output(&mut self, name: &str, path: &Path) -> PathBuf {
        self.outputs.insert(name.to_owned(), path.display().to_string());
        path.to_path_buf()
    }

    pub fn param(&mut self, name: &str, value: impl ToString) {
        self.parameters.insert(name.to_owned(), value.to_string());
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).map_err(|e| Error::State(e.to_string()))?;
        std::fs::write(dir.join(format!("{}.manifest.toml", self.command)), text)?;
        Ok(())
    }
}
