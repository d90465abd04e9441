//! Declarative run configuration (a single JSON document).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::PredicateHops;
use crate::neighborhood::Hop;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("config references missing path {0}")]
    MissingPath(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFiles {
    pub embeddings: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub train: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub types: Option<PathBuf>,
    #[serde(default)]
    pub models: BTreeMap<String, ModelFiles>,
}

fn default_k() -> Vec<usize> {
    vec![3, 10, 100]
}

fn default_n() -> usize {
    100
}

fn default_hops() -> Vec<Hop> {
    vec![Hop::One, Hop::Two]
}

fn default_predicate_k() -> Vec<usize> {
    vec![3, 10]
}

fn default_out() -> PathBuf {
    PathBuf::from("simaudit-out")
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_k")]
    pub k: Vec<usize>,
    /// Neighbour list depth computed on both sides.
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_hops")]
    pub hops: Vec<Hop>,
    #[serde(default)]
    pub include_backtracking: bool,
    #[serde(default)]
    pub predicate_hops: PredicateHops,
    #[serde(default = "default_predicate_k")]
    pub predicate_importance_k: Vec<usize>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// 0 = available parallelism.
    #[serde(default)]
    pub threads: usize,
    #[serde(default = "default_true")]
    pub cache: bool,
}

impl RunConfig {
    /// Parses and normalises (sorted, de-duplicated K/hop lists).
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.normalize();
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string_pretty(&value).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|_| ConfigError::MissingPath(path.display().to_string()))?;
        let cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(cfg.resolved_against(base))
    }

    pub fn normalize(&mut self) {
        for list in [&mut self.k, &mut self.predicate_importance_k] {
            list.sort_unstable();
            list.dedup();
        }
        self.hops.sort_unstable();
        self.hops.dedup();
    }

    /// Makes every relative path relative to `base`.
    pub fn resolved_against(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            fix(&mut d.train);
            for p in [&mut d.valid, &mut d.test, &mut d.types].into_iter().flatten() {
                fix(p);
            }
            for files in d.models.values_mut() {
                fix(&mut files.embeddings);
                if let Some(r) = &mut files.ranks {
                    fix(r);
                }
            }
        }
        fix(&mut self.out);
        self
    }

    pub fn max_k(&self) -> usize {
        self.k
            .iter()
            .chain(&self.predicate_importance_k)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Keeps only the named models (no-op for an empty filter).
    pub fn retain_models(&mut self, names: &[String]) -> Result<(), ConfigError> {
        if names.is_empty() {
            return Ok(());
        }
        let known: BTreeSet<&String> = self.datasets.iter().flat_map(|d| d.models.keys()).collect();
        if let Some(missing) = names.iter().find(|n| !known.contains(n)) {
            return Err(ConfigError::Invalid(format!("--model {missing:?} is not configured")));
        }
        for d in &mut self.datasets {
            d.models.retain(|name, _| names.contains(name));
        }
        Ok(())
    }

    /// Structural checks; `check_paths` also requires referenced files to exist.
    pub fn validate(&self, check_paths: bool) -> Result<(), ConfigError> {
        let invalid = |msg: String| Err(ConfigError::Invalid(msg));
        if self.datasets.is_empty() {
            return invalid("at least one dataset is required".into());
        }
        if self.n == 0 {
            return invalid("n must be >= 1".into());
        }
        if self.k.is_empty() || self.k.contains(&0) {
            return invalid("k must be a non-empty list of depths >= 1".into());
        }
        if self.predicate_importance_k.contains(&0) {
            return invalid("predicate_importance_k entries must be >= 1".into());
        }
        if self.hops.is_empty() {
            return invalid("hops must not be empty".into());
        }
        if self.max_k() > self.n {
            return invalid(format!("max K = {} exceeds n = {}", self.max_k(), self.n));
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !names.insert(&d.name) {
                return invalid(format!("duplicate dataset name {:?}", d.name));
            }
        }
        if check_paths {
            for d in &self.datasets {
                let mut paths: Vec<&PathBuf> = vec![&d.train];
                paths.extend([&d.valid, &d.test, &d.types].into_iter().flatten());
                for files in d.models.values() {
                    paths.push(&files.embeddings);
                    paths.extend(files.ranks.iter());
                }
                if let Some(p) = paths.into_iter().find(|p| !p.exists()) {
                    return Err(ConfigError::MissingPath(p.display().to_string()));
                }
            }
        }
        Ok(())
    }
}
