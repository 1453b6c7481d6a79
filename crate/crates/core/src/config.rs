//! Run configuration read from a TOML file.
//!
//! Relative paths are resolved against the directory holding the config
//! file. Command-line overrides are applied on top by the caller.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::CleanOptions;
use crate::error::{Error, Result};
use crate::experiments::ScenarioConfig;
use crate::index::IndexParams;
use crate::indicators::IndicatorBattery;

/// Where the prediction target comes from: a market column already in the
/// corpus, or a daily market-cap table from which the index is computed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSource {
    pub metric: Option<String>,
    pub mcaps: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default = "default_periods")]
    pub periods: Vec<NaiveDate>,
    #[serde(default = "default_windows")]
    pub windows: Vec<u32>,
    pub target: TargetSource,
    #[serde(default)]
    pub index: IndexParams,
    #[serde(default)]
    pub clean: CleanOptions,
    #[serde(default)]
    pub indicators: IndicatorBattery,
    #[serde(default)]
    pub experiment: ScenarioConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

fn default_periods() -> Vec<NaiveDate> {
    vec![
        NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(),
        NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
    ]
}

fn default_windows() -> Vec<u32> {
    vec![1, 7, 30, 90, 180]
}

impl RunConfig {
    /// Minimal config for a manifest and target, everything else default.
    pub fn new(manifest: impl Into<PathBuf>, target: TargetSource) -> Self {
        Self {
            manifest: manifest.into(),
            out: default_out(),
            seed: 0,
            jobs: None,
            periods: default_periods(),
            windows: default_windows(),
            target,
            index: IndexParams::default(),
            clean: CleanOptions::default(),
            indicators: IndicatorBattery::default(),
            experiment: ScenarioConfig::default(),
        }
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
    }

    /// Read, resolve relative paths and validate.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.out);
        if let Some(m) = self.target.mcaps.as_mut() {
            fix(m);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.manifest.is_file() {
            return Err(Error::Config(format!("manifest {} does not exist", self.manifest.display())));
        }
        match (&self.target.metric, &self.target.mcaps) {
            (Some(_), None) => {}
            (None, Some(p)) if p.is_file() => {}
            (None, Some(p)) => {
                return Err(Error::Config(format!("market-cap file {} does not exist", p.display())))
            }
            _ => return Err(Error::Config("[target] needs exactly one of `metric` or `mcaps`".into())),
        }
        if self.periods.is_empty() || self.windows.is_empty() {
            return Err(Error::Config("periods and windows must not be empty".into()));
        }
        if self.windows.contains(&0) {
            return Err(Error::Config("windows must be at least 1 day".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        self.index.validate()?;
        self.experiment.validate()
    }
}
