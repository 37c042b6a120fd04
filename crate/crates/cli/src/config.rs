//! Experiment configuration: TOML files with per-key command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

/// Raw config file contents; every field optional so flags can fill gaps.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<String>,
    #[serde(rename = "N")]
    pub divisions: Option<Vec<usize>>,
    pub p: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub case: Option<String>,
    pub out: Option<PathBuf>,
    pub max_picard: Option<usize>,
    pub relax: Option<f64>,
    pub particles: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub snapshot_every: Option<usize>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ConfigFile = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn check_experiment(&self, expected: &str) -> Result<()> {
        if let Some(e) = &self.experiment {
            if e != expected {
                bail!("config declares experiment '{e}' but the '{expected}' subcommand was invoked");
            }
        }
        Ok(())
    }
}

/// Pick the first present value: command-line flag, config file, default.
pub fn resolve<T: Clone>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
