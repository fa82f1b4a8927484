//! File-backed model registry: registration with a monotone sequence counter,
//! best-model selection under an evaluation strategy, and ModelRef resolution
//! for deployment pinning.
//!
//! Persistence is a single JSON file rewritten atomically (temp file plus
//! rename). Concurrent registration is the caller's problem: single-writer.

use crate::lang::{is_identifier, ModelRef};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

/// One registered model version with pre-recorded evaluation metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRecord {
    pub name: String,
    pub version: String,
    pub metrics: BTreeMap<String, f64>,
    pub size_mb: f64,
    pub gpu_required: bool,
    pub created_seq: u64,
}

/// Which direction a metric is compared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Maximize,
    Minimize,
}

/// User-defined evaluation strategy: optimize `metric` in `direction`.
/// Written as `maximize:accuracy` or `minimize:latency_ms` on the CLI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalStrategy {
    pub direction: Direction,
    pub metric: String,
}

impl FromStr for EvalStrategy {
    type Err = RegistryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (dir, metric) = s
            .split_once(':')
            .ok_or_else(|| RegistryError::BadStrategy(s.to_string()))?;
        let direction = match dir {
            "maximize" => Direction::Maximize,
            "minimize" => Direction::Minimize,
            _ => return Err(RegistryError::BadStrategy(s.to_string())),
        };
        if !is_identifier(metric) {
            return Err(RegistryError::BadStrategy(s.to_string()));
        }
        Ok(EvalStrategy {
            direction,
            metric: metric.to_string(),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("model {name}@{version} is already registered")]
    Duplicate { name: String, version: String },
    #[error("version 'latest' is reserved and cannot be registered")]
    ReservedVersion,
    #[error("invalid model name or version '{0}'")]
    BadIdentifier(String),
    #[error("size_mb must be greater than 0, got {0}")]
    BadSize(f64),
    #[error("no model named '{0}' in the registry")]
    UnknownModel(String),
    #[error("model {name} has no version {version}")]
    UnknownVersion { name: String, version: String },
    #[error("no record of model '{name}' carries metric '{metric}'")]
    MetricAbsent { name: String, metric: String },
    #[error("strategy must look like maximize:metric or minimize:metric, got '{0}'")]
    BadStrategy(String),
    #[error("registry file is malformed: {0}")]
    Malformed(String),
    #[error("registry I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// In-memory registry store backed by the on-disk JSON document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryStore {
    pub models: Vec<ModelRecord>,
}

impl RegistryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a registry document from JSON text.
    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        serde_json::from_str(text).map_err(|e| RegistryError::Malformed(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Loads the store at `path`, or an empty store when the file is absent.
    pub fn load_or_default(path: &Path) -> Result<Self, RegistryError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::new())
        }
    }

    /// Atomically rewrites the registry file: write a temp file in the same
    /// directory, then rename over the target.
    pub fn save(&self, path: &Path) -> Result<(), RegistryError> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
        let mut tmp = match dir {
            Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
            None => tempfile::NamedTempFile::new_in(".")?,
        };
        let mut text = serde_json::to_string_pretty(self).expect("registry serializes");
        text.push('\n');
        tmp.write_all(text.as_bytes())?;
        tmp.persist(path).map_err(|e| RegistryError::Io(e.error))?;
        Ok(())
    }

    /// Registers a new (name, version) record. `created_seq` is assigned by
    /// the store: previous maximum plus one, or 0 for the first record.
    pub fn register(
        &mut self,
        name: &str,
        version: &str,
        metrics: BTreeMap<String, f64>,
        size_mb: f64,
        gpu_required: bool,
    ) -> Result<&ModelRecord, RegistryError> {
        if !is_identifier(name) {
            return Err(RegistryError::BadIdentifier(name.to_string()));
        }
        if version.is_empty() || !version.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(RegistryError::BadIdentifier(version.to_string()));
        }
        if version == "latest" {
            return Err(RegistryError::ReservedVersion);
        }
        if size_mb <= 0.0 {
            return Err(RegistryError::BadSize(size_mb));
        }
        if self.models.iter().any(|m| m.name == name && m.version == version) {
            return Err(RegistryError::Duplicate {
                name: name.to_string(),
                version: version.to_string(),
            });
        }
        let created_seq = self
            .models
            .iter()
            .map(|m| m.created_seq + 1)
            .max()
            .unwrap_or(0);
        self.models.push(ModelRecord {
            name: name.to_string(),
            version: version.to_string(),
            metrics,
            size_mb,
            gpu_required,
            created_seq,
        });
        Ok(self.models.last().expect("just pushed"))
    }

    /// Records named `name`, in store order.
    pub fn versions_of(&self, name: &str) -> Vec<&ModelRecord> {
        self.models.iter().filter(|m| m.name == name).collect()
    }

    /// Picks the best record named `name` under `strategy`: the extreme
    /// metric value, ties broken by the smallest `created_seq`.
    pub fn select_best(
        &self,
        name: &str,
        strategy: &EvalStrategy,
    ) -> Result<&ModelRecord, RegistryError> {
        let named = self.versions_of(name);
        if named.is_empty() {
            return Err(RegistryError::UnknownModel(name.to_string()));
        }
        let mut best: Option<(&ModelRecord, f64)> = None;
        for record in named {
            let Some(&value) = record.metrics.get(&strategy.metric) else {
                continue;
            };
            best = Some(match best {
                None => (record, value),
                Some((cur, cur_value)) => {
                    let better = match strategy.direction {
                        Direction::Maximize => value > cur_value,
                        Direction::Minimize => value < cur_value,
                    };
                    let tie = value == cur_value && record.created_seq < cur.created_seq;
                    if better || tie {
                        (record, value)
                    } else {
                        (cur, cur_value)
                    }
                }
            });
        }
        best.map(|(r, _)| r).ok_or_else(|| RegistryError::MetricAbsent {
            name: name.to_string(),
            metric: strategy.metric.clone(),
        })
    }

    /// Resolves a ModelRef to a concrete record: `latest` goes through
    /// [`select_best`], explicit versions match exactly.
    pub fn resolve(
        &self,
        model: &ModelRef,
        strategy: &EvalStrategy,
    ) -> Result<&ModelRecord, RegistryError> {
        if model.is_latest() {
            return self.select_best(&model.name, strategy);
        }
        if self.versions_of(&model.name).is_empty() {
            return Err(RegistryError::UnknownModel(model.name.clone()));
        }
        self.models
            .iter()
            .find(|m| m.name == model.name && m.version == model.version)
            .ok_or_else(|| RegistryError::UnknownVersion {
                name: model.name.clone(),
                version: model.version.clone(),
            })
    }
}
