use serde::Serialize;
use thiserror::Error;

use super::{Check, Command, RunConfig, SpaceSpec};
use crate::error::Error;

/// Summary of one run, written last as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: ConfigEcho,
    /// Present only when requested, so that default manifests are
    /// reproducible byte for byte.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock: Option<WallClock>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    pub passed: bool,
}

/// The effective configuration, minus the output directory (which does not
/// influence any result).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub space: Option<SpaceSpec>,
    pub seed: u64,
    pub params: serde_json::Value,
}

impl From<&RunConfig> for ConfigEcho {
    fn from(c: &RunConfig) -> Self {
        ConfigEcho { space: c.space.clone(), seed: c.seed, params: c.params.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub elapsed_s: f64,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Failures that prevent a manifest from being produced.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("I/O failure: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Io(_) => 3,
        }
    }
}

/// Classifies a library error: bad inputs are configuration errors,
/// numerical failures are reported as failed checks (`None`).
pub(crate) fn classify(e: &Error) -> Option<RunError> {
    match e {
        Error::InvalidConfig(m) => Some(RunError::Config(m.clone())),
        Error::InvalidExponent { .. }
        | Error::InvalidParameter(_)
        | Error::UnsupportedKind { .. }
        | Error::InvalidAlpha(_)
        | Error::NonPositiveField { .. }
        | Error::NotAProbabilityDensity { .. }
        | Error::SpaceMismatch => Some(RunError::Config(e.to_string())),
        Error::Io(m) => Some(RunError::Io(m.clone())),
        _ => None,
    }
}
