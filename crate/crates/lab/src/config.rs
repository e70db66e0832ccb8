//! Experiment configuration files.
//!
//! ```toml
//! [experiment]
//! id = "loss-series"
//! seed = 7                 # master seed; required for stochastic experiments
//! out = "results"          # optional; `<out>/<id>/` receives the CSVs
//! method = "enumerate"     # enumerate | binomial | support | monte_carlo
//! replicas = 200           # Monte Carlo replicas
//! horizons = [8, 12]
//!
//! [measures]               # measure or class specs, see `spec`
//! mu = "bernoulli{0.3}"
//!
//! [params]                 # experiment-specific scalars and lists
//!
//! [caps]                   # resource limits
//! cells = 16777216
//! class_size = 10000
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mixpred::loss::Method;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};
use crate::spec::ClassSpec;

pub const DEFAULT_CELL_CAP: u64 = 1 << 24;
pub const DEFAULT_CLASS_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Enumerate,
    Binomial,
    Support,
    MonteCarlo,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Caps {
    /// Largest `|X|^n` any exhaustive sum may visit.
    pub cells: u64,
    pub class_size: usize,
    /// Start-state truncation for the chain experiments.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_max: Option<usize>,
}

impl Default for Caps {
    fn default() -> Self {
        Self { cells: DEFAULT_CELL_CAP, class_size: DEFAULT_CLASS_CAP, j_max: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Header,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub measures: BTreeMap<String, ClassSpec>,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub params: toml::Table,
    #[serde(default)]
    pub caps: Caps,
}

impl ExperimentConfig {
    /// A config with only the id set; everything else takes its default.
    #[must_use]
    pub fn for_id(id: &str) -> Self {
        Self { experiment: Header { id: id.to_string(), ..Header::default() }, ..Self::default() }
    }

    pub fn parse(text: &str) -> LabResult<Self> {
        toml::from_str(text).map_err(|e| LabError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            LabError::Config(m) => LabError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    #[must_use]
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs contain only TOML-representable values")
    }

    /// The configured method, with the master seed for Monte Carlo.
    pub fn method(&self, default: MethodName) -> LabResult<Method> {
        Ok(match self.experiment.method.unwrap_or(default) {
            MethodName::Enumerate => Method::Enumerate,
            MethodName::Binomial => Method::Binomial,
            MethodName::Support => Method::Support,
            MethodName::MonteCarlo => {
                let seed = self.experiment.seed.ok_or_else(|| LabError::MissingSeed(self.experiment.id.clone()))?;
                Method::MonteCarlo { replicas: self.experiment.replicas.unwrap_or(200), seed }
            }
        })
    }

    pub fn check_cells(&self, alphabet: usize, n: usize) -> LabResult<()> {
        let cells = (alphabet as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        if cells > u128::from(self.caps.cells) {
            return Err(LabError::Cap { cap: "cells", needed: cells, limit: u128::from(self.caps.cells) });
        }
        Ok(())
    }
}
