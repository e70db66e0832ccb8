//! Experiment harness for `mixpred`: a registry of reproducible experiments,
//! TOML configs, CSV output and the `mixpred` command line.
//!
//! ```no_run
//! use mixpred_lab::{csv_export, run, ExperimentConfig};
//!
//! let cfg = ExperimentConfig::parse("[experiment]\nid = \"nml-negative\"\n").unwrap();
//! let result = run(&cfg).unwrap();
//! assert!(result.pass());
//! csv_export(&result, std::path::Path::new("out/nml-negative")).unwrap();
//! ```

pub mod config;
pub mod error;
pub mod experiments;
pub mod registry;
pub mod run;
pub mod spec;
pub mod table;

pub use config::ExperimentConfig;
pub use error::{LabError, LabResult};
pub use registry::{find, registry, Experiment};
pub use run::{csv_export, run, validate, ExperimentResult};
pub use table::Table;
