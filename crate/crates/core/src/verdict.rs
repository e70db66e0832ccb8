use serde::{Deserialize, Serialize};

/// One numeric check `lhs <= rhs + tolerance` (or another stated relation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes iff `lhs <= rhs + tolerance`.
    pub fn le(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = lhs <= rhs + tolerance;
        Self { id: id.into(), lhs, rhs, tolerance, pass }
    }

    /// Passes iff `lhs >= rhs - tolerance`.
    pub fn ge(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = lhs >= rhs - tolerance;
        Self { id: id.into(), lhs, rhs, tolerance, pass }
    }

    /// Passes iff `|lhs - rhs| <= tolerance`.
    pub fn close(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let pass = (lhs - rhs).abs() <= tolerance || (lhs == rhs);
        Self { id: id.into(), lhs, rhs, tolerance, pass }
    }

    /// A boolean property, recorded as `lhs = 1/0` against `rhs = 1`.
    pub fn holds(id: impl Into<String>, ok: bool) -> Self {
        Self { id: id.into(), lhs: if ok { 1.0 } else { 0.0 }, rhs: 1.0, tolerance: 0.0, pass: ok }
    }

    #[must_use]
    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "pass"
        } else {
            "fail"
        }
    }
}

#[must_use]
pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
