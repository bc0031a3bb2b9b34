use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cmrx_core::confidence::{Ledger, ReferenceTable, ScoreParams, Scorer};
use cmrx_core::gateway::{EndpointConfig, SamplingConfig};

use crate::CliError;

/// Everything a run needs. Loaded from TOML, then the inference endpoint
/// settings are overridden from the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub endpoint: EndpointConfig,
    pub scoring: ScoreParams,
    pub data_dir: PathBuf,
    /// Reference range table; the built-in table when unset.
    pub ranges_path: Option<PathBuf>,
    /// Formula ledger; the built-in ledger when unset.
    pub ledger_path: Option<PathBuf>,
    pub workers: usize,
    pub listen: String,
    /// Review console build served under `/`.
    pub static_dir: Option<PathBuf>,
    /// Required as `Authorization: Bearer <token>` on `/v1` when set.
    pub auth_token: Option<String>,
    /// Use the offline rule-based extractor instead of the endpoint.
    pub mock: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            endpoint: EndpointConfig::default(),
            scoring: ScoreParams::default(),
            data_dir: PathBuf::from("cmrx-data"),
            ranges_path: None,
            ledger_path: None,
            workers: 4,
            listen: "127.0.0.1:8080".into(),
            static_dir: None,
            auth_token: None,
            mock: false,
        }
    }
}

impl PipelineConfig {
    /// Reads `path` if given, applies environment overrides and validates.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => PipelineConfig::default(),
        };
        cfg.endpoint
            .apply_env(|k| std::env::var(k).ok())
            .map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        self.endpoint.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.scoring.validate().map_err(|e| CliError::Config(e.to_string()))?;
        for p in [&self.ranges_path, &self.ledger_path, &self.static_dir].into_iter().flatten() {
            if !p.exists() {
                return bad(format!("{} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn scorer(&self) -> Result<Scorer, CliError> {
        let ranges = match &self.ranges_path {
            Some(p) => ReferenceTable::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => ReferenceTable::builtin(),
        };
        let ledger = match &self.ledger_path {
            Some(p) => Ledger::load(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
            None => Ledger::builtin(),
        };
        Ok(Scorer::new(ranges, ledger, self.scoring))
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            n_samples: self.scoring.n_samples,
            temperature: self.scoring.temperature,
            prompt_mode: self.endpoint.prompt_mode,
            structured: self.endpoint.structured_mode,
        }
    }
}
