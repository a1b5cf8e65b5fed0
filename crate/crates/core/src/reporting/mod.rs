//! Reproducible experiment runs: JSON configs in, CSV/JSON/SVG artifacts
//! and a pass/fail manifest out.

mod commands;
mod config;
mod manifest;
pub mod suite;
mod sweep;

pub use commands::run;
pub use config::{Command, FieldSpec, Overrides, RunConfig, SpaceSpec};
pub use manifest::{RunManifest, RunError};
pub use sweep::{critical_limit_sweep, extrapolate_to_zero, CriticalLimit, SweepRow};

use serde::Serialize;

/// One pass/fail check with its measured value and tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed: measured <= tolerance, measured, tolerance, detail: detail.into() }
    }

    /// Passes when `measured ≥ tolerance`.
    pub fn at_least(name: &str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed: measured >= tolerance, measured, tolerance, detail: detail.into() }
    }

    /// Conjunction of several checks under one name; the measured value and
    /// tolerance of the first failing part (or the first part) are kept.
    pub fn all(name: &str, parts: Vec<Check>) -> Self {
        let passed = parts.iter().all(|c| c.passed);
        let lead = parts.iter().find(|c| !c.passed).or(parts.first()).cloned();
        let detail = parts
            .iter()
            .map(|c| format!("{}: {} (measured {:e}, tol {:e})", c.name, if c.passed { "ok" } else { "FAIL" }, c.measured, c.tolerance))
            .collect::<Vec<_>>()
            .join("; ");
        match lead {
            Some(l) => Check { name: name.into(), passed, measured: l.measured, tolerance: l.tolerance, detail },
            None => Check { name: name.into(), passed: true, measured: 0.0, tolerance: 0.0, detail },
        }
    }
}

/// A file to be written under the run's output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub contents: String,
}

impl Artifact {
    pub fn new(path: impl Into<String>, contents: impl Into<String>) -> Self {
        Artifact { path: path.into(), contents: contents.into() }
    }
}

/// Checks, artifacts and warnings produced by one command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub artifacts: Vec<Artifact>,
    pub warnings: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub(crate) fn extend_prefixed(&mut self, prefix: &str, other: Outcome) {
        self.checks.extend(other.checks);
        self.artifacts
            .extend(other.artifacts.into_iter().map(|a| Artifact::new(format!("{prefix}/{}", a.path), a.contents)));
        self.warnings.extend(other.warnings);
    }
}
