//! Dispatch, the per-run context and CSV export.

use std::cell::RefCell;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mixpred::loss::Method;
use mixpred::{Check, MeasureRef, ModelClass};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::{ExperimentConfig, MethodName};
use crate::error::{LabError, LabResult};
use crate::registry::{find, Experiment};
use crate::spec::{check_families, parse_measure, ClassSpec};
use crate::table::Table;

/// What an experiment hands back to the runner.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub id: String,
    pub anchor: &'static str,
    pub seed: Option<u64>,
    /// The effective configuration: every value the run read, defaults included.
    pub config: ExperimentConfig,
    pub tables: Vec<Table>,
    pub verdicts: Vec<Check>,
    pub wall_time: Duration,
}

impl ExperimentResult {
    /// Conjunction of all verdicts.
    #[must_use]
    pub fn pass(&self) -> bool {
        mixpred::verdict::all_pass(&self.verdicts)
    }

    #[must_use]
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

/// Typed access to a config; records the values actually used.
pub struct Ctx {
    cfg: ExperimentConfig,
    echo: RefCell<ExperimentConfig>,
}

impl Ctx {
    fn new(cfg: ExperimentConfig) -> Self {
        let mut echo = ExperimentConfig::for_id(&cfg.experiment.id);
        echo.experiment.seed = cfg.experiment.seed;
        echo.caps = cfg.caps.clone();
        Self { cfg, echo: RefCell::new(echo) }
    }

    #[must_use]
    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn seed(&self) -> LabResult<u64> {
        self.cfg.experiment.seed.ok_or_else(|| LabError::MissingSeed(self.cfg.experiment.id.clone()))
    }

    pub fn param<T: DeserializeOwned + Serialize>(&self, key: &str, default: T) -> LabResult<T> {
        let value = match self.cfg.params.get(key) {
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e| LabError::Config(format!("params.{key}: {e}")))?,
            None => default,
        };
        let recorded = toml::Value::try_from(&value).map_err(|e| LabError::Config(format!("params.{key}: {e}")))?;
        self.echo.borrow_mut().params.insert(key.to_string(), recorded);
        Ok(value)
    }

    #[must_use]
    pub fn horizons(&self, default: &[usize]) -> Vec<usize> {
        let h = self.cfg.experiment.horizons.clone().unwrap_or_else(|| default.to_vec());
        self.echo.borrow_mut().experiment.horizons = Some(h.clone());
        h
    }

    pub fn method(&self, default: MethodName) -> LabResult<Method> {
        let name = self.cfg.experiment.method.unwrap_or(default);
        let mut echo = self.echo.borrow_mut();
        echo.experiment.method = Some(name);
        if name == MethodName::MonteCarlo {
            echo.experiment.replicas = Some(self.cfg.experiment.replicas.unwrap_or(200));
        }
        drop(echo);
        self.cfg.method(default)
    }

    fn spec(&self, key: &str, default: ClassSpec) -> ClassSpec {
        let s = self.cfg.measures.get(key).cloned().unwrap_or(default);
        self.echo.borrow_mut().measures.insert(key.to_string(), s.clone());
        s
    }

    pub fn measure(&self, key: &str, default: &str) -> LabResult<MeasureRef> {
        match self.spec(key, ClassSpec::Generator(default.into())) {
            ClassSpec::Generator(s) => parse_measure(&s),
            ClassSpec::Members(_) => Err(LabError::Config(format!("measures.{key} must be a single spec"))),
        }
    }

    /// Raw spec text of a single-measure key.
    pub fn measure_text(&self, key: &str, default: &str) -> LabResult<String> {
        match self.spec(key, ClassSpec::Generator(default.into())) {
            ClassSpec::Generator(s) => Ok(s),
            ClassSpec::Members(_) => Err(LabError::Config(format!("measures.{key} must be a single spec"))),
        }
    }

    /// Spec strings of a list-valued key.
    pub fn spec_list(&self, key: &str, default: &[&str]) -> Vec<String> {
        let d = ClassSpec::Members(default.iter().map(|s| (*s).to_string()).collect());
        self.spec(key, d).entries().into_iter().map(str::to_string).collect()
    }

    pub fn class(&self, key: &str, default: &[&str]) -> LabResult<ModelClass> {
        let d = ClassSpec::Members(default.iter().map(|s| (*s).to_string()).collect());
        self.spec(key, d).build(self.cfg.caps.class_size)
    }

    pub fn check_cells(&self, alphabet: usize, n: usize) -> LabResult<()> {
        self.cfg.check_cells(alphabet, n)
    }

    pub fn j_max(&self, default: usize) -> usize {
        let j = self.cfg.caps.j_max.unwrap_or(default);
        self.echo.borrow_mut().caps.j_max = Some(j);
        j
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Static checks: known id, allowed keys, known families, seed where needed.
pub fn validate(cfg: &ExperimentConfig) -> LabResult<&'static Experiment> {
    let exp = find(&cfg.experiment.id)?;
    for key in cfg.params.keys() {
        if !exp.params.contains(&key.as_str()) {
            return Err(LabError::Config(format!(
                "`{}` takes no parameter `{key}` (allowed: {})",
                exp.id,
                exp.params.join(", ")
            )));
        }
    }
    for (key, spec) in &cfg.measures {
        if !exp.measures.contains(&key.as_str()) {
            return Err(LabError::Config(format!(
                "`{}` takes no measure `{key}` (allowed: {})",
                exp.id,
                exp.measures.join(", ")
            )));
        }
        spec.entries().into_iter().try_for_each(check_families)?;
    }
    let mc = cfg.experiment.method == Some(MethodName::MonteCarlo);
    if (exp.stochastic || mc) && cfg.experiment.seed.is_none() {
        return Err(LabError::MissingSeed(exp.id.to_string()));
    }
    Ok(exp)
}

pub fn run(cfg: &ExperimentConfig) -> LabResult<ExperimentResult> {
    let exp = validate(cfg)?;
    let ctx = Ctx::new(cfg.clone());
    let start = Instant::now();
    let outcome = (exp.run)(&ctx)?;
    let wall_time = start.elapsed();
    let mut config = ctx.echo.into_inner();
    config.experiment.out = cfg.experiment.out.clone();
    Ok(ExperimentResult {
        id: exp.id.to_string(),
        anchor: exp.anchor,
        seed: cfg.experiment.seed,
        config,
        tables: outcome.tables,
        verdicts: outcome.checks,
        wall_time,
    })
}

/// Writes `verdict.csv`, one CSV per table and `config.toml` into `dir`.
pub fn csv_export(result: &ExperimentResult, dir: &Path) -> LabResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
    let mut written = Vec::new();
    let verdicts = Table::verdicts(&result.verdicts);
    for t in std::iter::once(&verdicts).chain(&result.tables) {
        let path = dir.join(format!("{}.csv", t.name));
        let file = std::fs::File::create(&path).map_err(|e| LabError::io(&path, e))?;
        t.write_csv(std::io::BufWriter::new(file))?;
        written.push(path);
    }
    let path = dir.join("config.toml");
    std::fs::write(&path, result.config.to_toml()).map_err(|e| LabError::io(&path, e))?;
    written.push(path);
    Ok(written)
}
