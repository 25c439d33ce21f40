//! Optional JSON config file. Command-line flags take precedence over it.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::commands::Suite;
use crate::error::CliError;
use crate::source::PresetArgs;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Chain JSON file, relative to the working directory.
    pub chain: Option<PathBuf>,
    /// Preset and its parameters, in the same names as the flags.
    pub model: Option<PresetArgs>,
    pub x0: Option<usize>,
    pub target: Option<Vec<usize>>,
    pub zetas: Option<Vec<f64>>,
    pub r_target: Option<f64>,
    pub t_max: Option<f64>,
    pub t_points: Option<usize>,
    pub suites: Option<Vec<Suite>>,
    pub grid: Option<Vec<f64>>,
    pub count: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: FileConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if cfg.chain.is_some() && cfg.model.as_ref().is_some_and(|m| m.preset.is_some()) {
            return Err(CliError::Config(format!("{}: give either chain or model.preset", path.display())));
        }
        if let Some(chain) = &cfg.chain {
            if !chain.exists() {
                return Err(CliError::Config(format!("{}: chain file {} not found", path.display(), chain.display())));
            }
        }
        Ok(cfg)
    }
}
