use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::Result;

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to reproduce a run. Carries no timestamps, so
/// identical runs write identical manifests.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub checkpoint_format: u32,
    pub config: ExperimentConfig,
    pub inputs: Vec<FileDigest>,
    /// Paths relative to the command's output directory.
    pub outputs: Vec<FileDigest>,
    pub notes: Vec<String>,
    #[serde(skip)]
    dir: PathBuf,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig, dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            checkpoint_format: heatcast_dl::model::CHECKPOINT_VERSION,
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            dir: dir.to_path_buf(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256 });
        Ok(())
    }

    /// Record a file already written into the output directory.
    pub fn output(&mut self, name: &str) -> Result<()> {
        let sha256 = sha256_file(&self.dir.join(name))?;
        self.outputs.push(FileDigest { path: name.to_string(), sha256 });
        Ok(())
    }

    pub fn note(&mut self, text: String) {
        self.notes.push(text);
    }

    pub fn write(self) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&self)?;
        text.push('\n');
        std::fs::write(self.dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}
