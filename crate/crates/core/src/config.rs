//! Run configuration: defaults, optional JSON file, validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::oracle::{DEFAULT_AUERBACH_CAP, DEFAULT_WIDTH_CAP};
use crate::snumbers::{Constants, DEFAULT_KG};
use crate::{Error, Result};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub kg_constant: f64,
    pub kappa: BTreeMap<String, f64>,
    pub tolerance: f64,
    pub seed: u64,
    pub cap_width_oracle: usize,
    pub cap_auerbach: usize,
    pub output_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            kg_constant: DEFAULT_KG,
            kappa: BTreeMap::new(),
            tolerance: DEFAULT_TOLERANCE,
            seed: 0,
            cap_width_oracle: DEFAULT_WIDTH_CAP,
            cap_auerbach: DEFAULT_AUERBACH_CAP,
            output_dir: PathBuf::from("."),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.cap_width_oracle < 2 || self.cap_auerbach < 2 {
            return Err(Error::Config("dimension caps must be at least 2".into()));
        }
        self.constants().map(|_| ())
    }

    pub fn constants(&self) -> Result<Constants> {
        Constants::new(self.kg_constant, self.kappa.clone())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Defaults, overlaid with the file at `path` when given.
pub fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            Config::from_json(&text)
        }
    }
}
