use std::path::Path;

use dpv_core::{DiscretizationConfig, EligibilityConfig, Schema, SearchConfig, SyntheticConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Everything a run needs besides file paths, read from one JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub train_fraction: f64,
    /// Grid for matching `H x` against subpopulation values.
    pub quantization: f64,
    pub schema: Schema,
    pub discretization: DiscretizationConfig,
    pub eligibility: EligibilityConfig,
    pub search: SearchConfig,
    pub synthetic: SyntheticConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            train_fraction: 0.8,
            quantization: 1e-6,
            schema: Schema::default(),
            discretization: DiscretizationConfig::default(),
            eligibility: EligibilityConfig::default(),
            search: SearchConfig::default(),
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    /// Propagates the seed and validates every section.
    pub fn resolve(&mut self) -> Result<(), CliError> {
        self.search.seed = self.seed;
        self.synthetic.seed = self.seed;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(CliError::Config(format!(
                "train_fraction: {} is outside (0, 1)",
                self.train_fraction
            )));
        }
        if !(self.quantization > 0.0 && self.quantization.is_finite()) {
            return Err(CliError::Config(format!("quantization: {} must be positive", self.quantization)));
        }
        self.eligibility
            .validate()
            .map_err(|(field, reason)| CliError::Config(format!("eligibility.{field}: {reason}")))?;
        self.search.validate().map_err(|e| CliError::Config(format!("search: {e}")))?;
        self.synthetic
            .validate()
            .map_err(|e| CliError::Config(format!("synthetic: {e}")))?;
        Ok(())
    }

    /// The resolved config as JSON, seed included, for embedding in artifacts.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
