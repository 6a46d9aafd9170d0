//! Run manifests and config loading.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bscb_core::experiment::ExperimentConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const RUN_FILE: &str = "run.json";
pub const RUN_FORMAT: u32 = 1;

/// Everything needed to redo a command: `bscb --config run.json <command>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: u32,
    pub command: String,
    pub seed: u64,
    /// File inputs and command options that are not part of the config.
    pub inputs: Inputs,
    /// Config after file, defaults and flags were merged; stage seeds are derived from `seed`.
    pub config: ExperimentConfig,
    pub versions: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inputs {
    pub model: Option<PathBuf>,
    pub map: Option<PathBuf>,
    pub resume_state: Option<PathBuf>,
    pub parameter: Option<String>,
    pub values: Option<Vec<f64>>,
    pub runs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &ExperimentConfig, inputs: Inputs) -> Self {
        let versions = [
            ("bscb".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("bscb-core".to_string(), bscb_core::VERSION.to_string()),
            ("run_format".to_string(), RUN_FORMAT.to_string()),
        ]
        .into();
        Self {
            format: RUN_FORMAT,
            command: command.into(),
            seed: config.seed,
            inputs,
            config: config.clone(),
            versions,
        }
    }
}

/// A loaded `--config`: a plain TOML config or an earlier run's manifest.
#[allow(clippy::large_enum_variant)]
pub enum Loaded {
    Config(ExperimentConfig),
    Manifest(RunManifest),
}

pub fn load_config(path: &Path) -> Result<Loaded, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| CliError::parse(path, e))?;
        if manifest.format != RUN_FORMAT {
            return Err(CliError::Usage(format!(
                "{}: run format {} is not supported",
                path.display(),
                manifest.format
            )));
        }
        return Ok(Loaded::Manifest(manifest));
    }
    let config = toml::from_str(&text).map_err(|e| CliError::parse(path, e))?;
    Ok(Loaded::Config(config))
}

pub fn write(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(bscb_core::Error::from)?;
    text.push('\n');
    write(dir, name, text)
}

/// Runs a CSV writer into a buffer and stores it.
pub fn write_csv(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut Vec<u8>) -> bscb_core::Result<()>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    write(dir, name, buf)
}
