//! Tunable thresholds and caps, loadable from `noteflow.toml`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CONFIG_ENV: &str = "NOTEFLOW_CONFIG";
pub const CONFIG_FILE: &str = "noteflow.toml";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: toml::de::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Max distinct values for a column to count as categorical.
    pub categorical_cap: usize,
    /// Share of non-null strings that must parse as dates.
    pub temporal_threshold: f64,
    /// Minimum |r| for correlation and trend facts.
    pub fact_threshold: f64,
    /// Numeric columns considered for pairwise correlation.
    pub numeric_pair_cap: usize,
    /// Histogram bin count.
    pub bins: usize,
    /// Recommendations kept per node after ranking.
    pub candidate_cap: usize,
    /// Keep every candidate instead of the top `candidate_cap`.
    pub full_candidates: bool,
    pub scatter_cap: usize,
    pub seed: u64,
    pub rel_tolerance: f64,
    pub abs_tolerance: f64,
    /// Custom transform registry; the bundled one is used when unset.
    pub registry: Option<PathBuf>,
    pub embed_data: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            categorical_cap: 20,
            temporal_threshold: 0.95,
            fact_threshold: 0.3,
            numeric_pair_cap: 15,
            bins: 10,
            candidate_cap: 30,
            full_candidates: false,
            scatter_cap: 2000,
            seed: 42,
            rel_tolerance: 1e-6,
            abs_tolerance: 1e-9,
            registry: None,
            embed_data: false,
        }
    }
}

impl Settings {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut settings = Self::from_toml(&text, path)?;
        // registry paths are relative to the config file
        if let (Some(reg), Some(dir)) = (&settings.registry, path.parent()) {
            if reg.is_relative() {
                settings.registry = Some(dir.join(reg));
            }
        }
        Ok(settings)
    }

    /// `$NOTEFLOW_CONFIG` if set, else `./noteflow.toml` if present, else defaults.
    pub fn discover() -> Result<Self, ConfigError> {
        if let Some(path) = std::env::var_os(CONFIG_ENV) {
            return Self::load(Path::new(&path));
        }
        let local = Path::new(CONFIG_FILE);
        if local.is_file() {
            return Self::load(local);
        }
        Ok(Self::default())
    }
}
