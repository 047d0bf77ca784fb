use serde::{Deserialize, Serialize};

/// One numerical assertion: a measured value against a target with a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub module: String,
    pub value: f64,
    pub target: f64,
    pub error: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    /// |value - target| / |target|.
    pub fn relative(module: &str, name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        let error = if target != 0.0 {
            ((value - target) / target).abs()
        } else {
            value.abs()
        };
        Check {
            name: name.into(),
            module: module.to_string(),
            value,
            target,
            error,
            tol,
            pass: error.is_finite() && error <= tol,
        }
    }

    /// |value - target| / scale.
    pub fn absolute(module: &str, name: impl Into<String>, value: f64, target: f64, scale: f64, tol: f64) -> Self {
        let error = (value - target).abs() / scale.abs().max(f64::MIN_POSITIVE);
        Check {
            name: name.into(),
            module: module.to_string(),
            value,
            target,
            error,
            tol,
            pass: error.is_finite() && error <= tol,
        }
    }

    /// value <= bound.
    pub fn at_most(module: &str, name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check {
            name: name.into(),
            module: module.to_string(),
            value,
            target: bound,
            error: value,
            tol: bound,
            pass: value.is_finite() && value <= bound,
        }
    }

    /// lo <= value <= hi; target records the midpoint.
    pub fn within(module: &str, name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        let mid = 0.5 * (lo + hi);
        Check {
            name: name.into(),
            module: module.to_string(),
            value,
            target: mid,
            error: (value - mid).abs(),
            tol: 0.5 * (hi - lo),
            pass: value.is_finite() && value >= lo && value <= hi,
        }
    }

    pub fn flag(module: &str, name: impl Into<String>, ok: bool) -> Self {
        Check {
            name: name.into(),
            module: module.to_string(),
            value: if ok { 1.0 } else { 0.0 },
            target: 1.0,
            error: if ok { 0.0 } else { 1.0 },
            tol: 0.0,
            pass: ok,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}::{} value={:.6e} target={:.6e} err={:.3e} tol={:.1e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.module,
            self.name,
            self.value,
            self.target,
            self.error,
            self.tol
        )
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
