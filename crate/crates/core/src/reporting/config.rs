use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model_space::{ModelSpace, ScalarField, SpaceKind};
use crate::sobolev::extremal_field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyCd,
    Bochner,
    SobolevDeficit,
    ExtremalSweep,
    Minimize,
    RigidityScan,
    CriticalLimit,
    FlowFd,
    FlowFastDiffusion,
    EntropyInequality,
    FullSuite,
}

impl Command {
    pub const ALL: [Command; 11] = [
        Command::VerifyCd,
        Command::Bochner,
        Command::SobolevDeficit,
        Command::ExtremalSweep,
        Command::Minimize,
        Command::RigidityScan,
        Command::CriticalLimit,
        Command::FlowFd,
        Command::FlowFastDiffusion,
        Command::EntropyInequality,
        Command::FullSuite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::VerifyCd => "verify-cd",
            Command::Bochner => "bochner",
            Command::SobolevDeficit => "sobolev-deficit",
            Command::ExtremalSweep => "extremal-sweep",
            Command::Minimize => "minimize",
            Command::RigidityScan => "rigidity-scan",
            Command::CriticalLimit => "critical-limit",
            Command::FlowFd => "flow-fd",
            Command::FlowFastDiffusion => "flow-fast-diffusion",
            Command::EntropyInequality => "entropy-inequality",
            Command::FullSuite => "full-suite",
        }
    }

    pub fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Whether the command operates on a model space given in the config.
    pub fn needs_space(self) -> bool {
        !matches!(self, Command::FlowFd | Command::FullSuite)
    }
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    /// Defaults to `n` on the sphere and 1 elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    /// Defaults to `d` on the sphere; required for the Jacobi model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    pub resolution: usize,
}

impl SpaceSpec {
    pub fn build(&self) -> Result<ModelSpace> {
        let (d, n) = match self.kind {
            SpaceKind::SphereRadial => match (self.d, self.n) {
                (Some(d), Some(n)) => (d, n),
                (Some(d), None) => (d, f64::from(d)),
                (None, Some(n)) if n.fract() == 0.0 && n >= 1.0 => (n as u32, n),
                _ => return Err(Error::InvalidConfig("space.d is required for sphere_radial".into())),
            },
            SpaceKind::Jacobi => {
                let n = self.n.ok_or_else(|| Error::InvalidConfig("space.n is required for jacobi".into()))?;
                (self.d.unwrap_or(1), n)
            }
            SpaceKind::Circle => (self.d.unwrap_or(1), self.n.unwrap_or(3.0)),
        };
        ModelSpace::build(self.kind, d, n, self.resolution)
    }
}

/// A field described in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// `(β − cos θ)^{−(d−2)/2}` (sphere only).
    Extremal { beta: f64 },
    /// `1 + amplitude·cos θ`.
    CosineBump { amplitude: f64 },
    /// `offset + Σ_k coeffs[k−1]·cos kθ`.
    Trig { offset: f64, coeffs: Vec<f64> },
    Constant { value: f64 },
}

impl FieldSpec {
    pub fn sample(&self, space: &ModelSpace) -> Result<ScalarField> {
        match self {
            FieldSpec::Extremal { beta } => extremal_field(space, *beta),
            FieldSpec::CosineBump { amplitude } => {
                let a = *amplitude;
                Ok(space.field_from_fn(|t| 1.0 + a * t.cos()))
            }
            FieldSpec::Trig { offset, coeffs } => Ok(space.field_from_fn(|t| {
                offset + coeffs.iter().enumerate().map(|(k, c)| c * ((k + 1) as f64 * t).cos()).sum::<f64>()
            })),
            FieldSpec::Constant { value } => Ok(space.constant(*value)),
        }
    }
}

/// Parsed JSON configuration. Command-specific settings live in `params`
/// and are decoded by the command itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<SpaceSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "empty_params")]
    pub params: serde_json::Value,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl RunConfig {
    /// A config with defaults for everything but the command.
    pub fn for_command(command: Command) -> Self {
        RunConfig { command: Some(command), space: None, seed: 0, output_dir: default_output_dir(), params: empty_params() }
    }

    /// Parses a JSON config; errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        parse_with_path(text, "")
    }

    /// Decodes the `params` block into a command's parameter type.
    pub fn params<T: DeserializeOwned>(&self) -> Result<T> {
        let value = if self.params.is_null() { empty_params() } else { self.params.clone() };
        serde_path_to_error::deserialize(value).map_err(|e| path_error("params", e.path().to_string(), e.inner()))
    }

    pub fn apply(&mut self, overrides: &Overrides) -> Result<()> {
        if let Some(out) = &overrides.output_dir {
            self.output_dir = out.clone();
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(n) = overrides.resolution {
            match &mut self.space {
                Some(s) => s.resolution = n,
                None => return Err(Error::InvalidConfig("--resolution given but the config has no space".into())),
            }
        }
        Ok(())
    }

    pub fn build_space(&self) -> Result<ModelSpace> {
        self.space.as_ref().ok_or_else(|| Error::InvalidConfig("missing key `space`".into()))?.build()
    }
}

fn parse_with_path<T: DeserializeOwned>(text: &str, prefix: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| path_error(prefix, e.path().to_string(), e.inner()))
}

fn path_error(prefix: &str, path: String, inner: &dyn std::fmt::Display) -> Error {
    let key = match (prefix.is_empty(), path.as_str()) {
        (true, ".") => "<root>".to_string(),
        (false, ".") => prefix.to_string(),
        (true, p) => p.to_string(),
        (false, p) => format!("{prefix}.{p}"),
    };
    Error::InvalidConfig(format!("at `{key}`: {inner}"))
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    /// Record wall-clock time in the manifest (off by default so manifests
    /// are reproducible byte for byte).
    pub timestamp: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_named() {
        let err = RunConfig::from_json(r#"{"command": "verify-cd", "sede": 3}"#).unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
        let err = RunConfig::from_json(r#"{"space": {"kind": "jacobi", "n": "x", "resolution": 64}}"#).unwrap_err();
        assert!(err.to_string().contains("space.n"), "{err}");
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = RunConfig::from_json(
            r#"{"command": "bochner", "seed": 1, "space": {"kind": "sphere_radial", "d": 3, "resolution": 64}}"#,
        )
        .unwrap();
        c.apply(&Overrides { seed: Some(9), resolution: Some(128), ..Default::default() }).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.build_space().unwrap().resolution(), 128);
    }

    #[test]
    fn field_specs_sample() {
        let s = ModelSpace::build(SpaceKind::SphereRadial, 3, 3.0, 32).unwrap();
        let f: FieldSpec = serde_json::from_str(r#"{"kind": "trig", "offset": 1, "coeffs": [0, 0.5]}"#).unwrap();
        let v = f.sample(&s).unwrap();
        let t = s.grid()[3];
        assert!((v.values()[3] - (1.0 + 0.5 * (2.0 * t).cos())).abs() < 1e-15);
    }
}
