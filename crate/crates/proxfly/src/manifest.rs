use std::path::{Path, PathBuf};

use serde::Serialize;

pub const FILE_NAME: &str = "manifest.toml";

/// Everything needed to rerun a command: written to the output directory
/// before any work starts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub tool_version: String,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub config_source: Option<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    /// Resolved configuration, TOML.
    pub config: String,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, output_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            output_dir: output_dir.to_path_buf(),
            config_source: None,
            checkpoints: Vec::new(),
            config: String::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(FILE_NAME);
        let text = toml::to_string(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
