use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

/// Process exit status by failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitClass {
    Usage = 2,
    Input = 3,
    Runtime = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub class: ExitClass,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            class: ExitClass::Usage,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self {
            class: ExitClass::Input,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            class: ExitClass::Runtime,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Optional TOML file whose keys mirror the long flag names. Flags win.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub zones: Option<PathBuf>,
    pub demand: Option<PathBuf>,
    pub synthetic: Option<bool>,
    pub rate: Option<f64>,
    pub horizon: Option<u32>,
    pub taxis: Option<u32>,
    pub policy: Option<String>,
    pub policies: Option<Vec<String>>,
    pub capacity: Option<u32>,
    pub max_pickup_delay: Option<u64>,
    pub max_detour_delay: Option<u64>,
    pub epoch_length: Option<u64>,
    pub max_group_size: Option<u32>,
    pub seed: Option<u64>,
    pub log: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub runs: Option<Vec<PathBuf>>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub rows: Option<u32>,
    pub cols: Option<u32>,
    pub edge_cost: Option<u64>,
    pub zone_block: Option<u32>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::input(format!("config {}: {e}", path.display())))
    }
}
