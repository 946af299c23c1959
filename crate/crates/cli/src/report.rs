//! Machine-readable result records.
//!
//! One JSON object per run, written as a single line. Identical config and
//! seed give byte-identical records except for the `timing_ms` field, which
//! is the last field and the only nondeterministic one.

use serde::Serialize;

use crate::config::ResolvedConfig;

/// One verified quantity with its tolerance.
#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    /// residual must stay below tolerance
    pub fn upper(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        CheckResult {
            name: name.into(),
            residual,
            tolerance,
            pass: residual < tolerance,
        }
    }

    /// residual must exceed the threshold (negative controls)
    pub fn lower(name: impl Into<String>, residual: f64, threshold: f64) -> Self {
        CheckResult {
            name: name.into(),
            residual,
            tolerance: threshold,
            pass: residual > threshold,
        }
    }
}

/// The full record of one command run.
#[derive(Debug, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub config: ResolvedConfig,
    pub checks: Vec<CheckResult>,
    pub warnings: Vec<String>,
    /// Extra command output (R-matrix entries, solution tensors, validator
    /// conditions), command-specific shape.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<serde_json::Value>,
    pub pass: bool,
    pub timing_ms: u128,
}

impl ResultRecord {
    pub fn new(command: &str, config: ResolvedConfig) -> Self {
        ResultRecord {
            command: command.to_string(),
            config,
            checks: Vec::new(),
            warnings: Vec::new(),
            output: None,
            pass: true,
            timing_ms: 0,
        }
    }

    pub fn push(&mut self, check: CheckResult) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    /// Record a propagated numeric error as a structured failure.
    pub fn fail_with_error(&mut self, context: &str, err: &qkzb_core::error::Error) {
        self.pass = false;
        self.warnings.push(format!("{context}: {err}"));
        self.checks.push(CheckResult {
            name: format!("{context} (errored)"),
            residual: f64::NAN,
            tolerance: 0.0,
            pass: false,
        });
    }
}
