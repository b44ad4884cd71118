use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slowave_core::detect::SystemKind;
use slowave_core::eval::{CvMode, Level, SiteRole};
use slowave_core::synth::SynthConfig;
use slowave_core::system::SystemConfig;

use crate::error::CliError;

/// JSON run description. Command-line flags override its fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemKind,
    pub level: Level,
    pub mode: CvMode,
    pub seed: u64,
    /// Full pipeline settings; when absent the system's defaults are used.
    pub pipeline: Option<SystemConfig>,
    /// One entry per synthetic site.
    pub cohorts: Vec<SynthConfig>,
    /// Cohort directory holding a manifest.
    pub data: Option<PathBuf>,
    /// Site roles for cross-validation; unlisted sites are `full`.
    pub roles: BTreeMap<String, SiteRole>,
    pub input: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Sampling rate assumed for CSV input.
    pub csv_fs: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemKind::Sdls,
            level: Level::Eeg,
            mode: CvMode::Loso,
            seed: 0,
            pipeline: None,
            cohorts: Vec::new(),
            data: None,
            roles: BTreeMap::new(),
            input: None,
            model: None,
            csv_fs: 256.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Pipeline settings with the run's system and seed applied.
    pub fn system_config(&self) -> Result<SystemConfig, CliError> {
        let mut cfg = match &self.pipeline {
            Some(p) => SystemConfig { system: self.system, ..p.clone() },
            None => SystemConfig::for_system(self.system),
        };
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn role(&self, site: &str) -> SiteRole {
        self.roles.get(site).copied().unwrap_or(SiteRole::Full)
    }
}

pub fn require<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    value.as_deref().ok_or_else(|| CliError::Config(format!("no {what} given")))
}
