//! Run configuration file. Every default lives in the `Default` impls of
//! [`SearchConfig`], [`MetricConfig`] and [`HttpConfig`].
//!
//! ```toml
//! space = "space.toml"        # optional, relative to this file
//! evaluator = "sfe"           # ngram | jaccard | sfe
//!
//! [search]
//! l_max = 6
//! max_children = 5
//! beta = 0.5
//! budget = 20
//! seed = 7
//!
//! [metric]
//! n_max = 4
//! ngram_weight = 0.5
//! jaccard_weight = 0.5
//!
//! [http]
//! url = "http://localhost:8000/v1/chat/completions"
//! api_key_env = "OPENAI_API_KEY"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::execution::HttpConfig;
use crate::search::SearchConfig;
use crate::similarity::{Metric, MetricConfig, MetricKind};
use crate::space::{Primitive, PrimitiveSpace, SpaceError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: PathBuf, msg: String },
}

impl ConfigError {
    pub fn invalid(path: &Path, msg: impl ToString) -> Self {
        Self::Invalid {
            path: path.to_path_buf(),
            msg: msg.to_string(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

pub(crate) fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Primitive-space file, used when no world supplies the space.
    pub space: Option<PathBuf>,
    #[serde(rename = "primitive", skip_serializing_if = "Vec::is_empty")]
    pub primitives: Vec<Primitive>,
    pub evaluator: MetricKind,
    pub search: SearchConfig,
    pub metric: MetricConfig,
    pub http: Option<HttpConfig>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let cfg: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.search.validate().map_err(|e| e.to_string())?;
        cfg.metric.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    /// Loads the file; relative paths inside it are rebased onto its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = read_file(path)?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| ConfigError::invalid(path, e))?;
        if let Some(space) = &cfg.space {
            cfg.space = Some(base_dir(path).join(space));
        }
        Ok(cfg)
    }

    pub fn evaluator(&self) -> Metric {
        Metric {
            kind: self.evaluator,
            cfg: self.metric.clone(),
        }
    }

    /// Space named by this config, if any.
    pub fn primitive_space(&self) -> Result<Option<PrimitiveSpace>, SpaceError> {
        match (&self.space, self.primitives.is_empty()) {
            (Some(path), _) => PrimitiveSpace::load(path).map(Some),
            (None, false) => PrimitiveSpace::new(self.primitives.clone()).map(Some),
            (None, true) => Ok(None),
        }
    }
}
