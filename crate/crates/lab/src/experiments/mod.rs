//! Experiment bodies, grouped by the core module they exercise.

pub mod adversarial;
pub mod basics;
pub mod capacity;
pub mod cover;
pub mod nml;

use mixpred::WeightScheme;

use crate::error::{LabError, LabResult};

pub(crate) fn scheme(name: &str) -> LabResult<WeightScheme> {
    Ok(match name {
        "main-theorem" => WeightScheme::MainTheorem,
        "quadratic" => WeightScheme::Quadratic,
        "telescoping" => WeightScheme::Telescoping,
        "geometric" => WeightScheme::Geometric,
        other => {
            return Err(LabError::Config(format!(
                "unknown weight scheme `{other}` (main-theorem | quadratic | telescoping | geometric)"
            )))
        }
    })
}
