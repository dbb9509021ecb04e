//! Run manifests: enough to repeat a command and check its inputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::files;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub config: Option<serde_json::Value>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn new(command: &str, argv: &[String]) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: argv.to_vec(),
            seed: None,
            config: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(FileHash { path: path.display().to_string(), sha256: sha256_file(path)? });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn config<T: Serialize>(&mut self, cfg: &T) -> Result<()> {
        self.config = Some(serde_json::to_value(cfg)?);
        Ok(())
    }

    /// Writes `<primary>.manifest.json` and returns its path.
    pub fn write_beside(&self, primary: &Path) -> Result<PathBuf> {
        let path = files::sibling(primary, ".manifest.json");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        files::write(&path, &text)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&files::read(path)?).with_context(|| format!("invalid manifest {}", path.display()))
    }

    /// Fails unless every recorded input still has its recorded hash.
    pub fn verify_inputs(&self) -> Result<()> {
        for f in &self.inputs {
            let now = sha256_file(Path::new(&f.path))?;
            if now != f.sha256 {
                bail!("input {} changed since the manifest was written", f.path);
            }
        }
        Ok(())
    }
}
