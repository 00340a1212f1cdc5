//! Run configuration: the JSON document every CLI invocation reduces to.
//!
//! ```json
//! {"schema_version": 1, "command": "verify",
//!  "measure": {"family": "gaussian", "dimension": 5},
//!  "seed": 7, "knobs": {"epsilons": [1.0, 0.1]}}
//! ```
//!
//! Unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discrete::GridKind;
use crate::error::{Error, Result};
use crate::measures::{FamilyName, Measure, MeasureConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Evolve,
    Kernel,
    Verify,
    Sharpness,
    Hypotheses,
    Positivity,
    Spectrum,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evolve => "evolve",
            Command::Kernel => "kernel",
            Command::Verify => "verify",
            Command::Sharpness => "sharpness",
            Command::Hypotheses => "hypotheses",
            Command::Positivity => "positivity",
            Command::Spectrum => "spectrum",
        }
    }

    /// Dimension used when the config names no measure.
    pub fn default_dimension(&self) -> usize {
        match self {
            Command::Verify | Command::Sharpness | Command::Hypotheses => 5,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethodName {
    Subordination,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumName {
    Indicator,
    Constant,
    Bump,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathName {
    Spectral,
    Kernel,
}

/// Numeric knobs; absent entries take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    pub max_degree: Option<u32>,
    pub times: Option<Vec<f64>>,
    /// "start:stop:count", per axis.
    pub grid: Option<String>,
    pub methods: Option<Vec<KernelMethodName>>,
    /// Subordination regularization.
    pub epsilon: Option<f64>,
    pub r0: Option<f64>,
    pub epsilons: Option<Vec<f64>>,
    /// c as a multiple of the Rellich constant.
    pub c_factor: Option<f64>,
    pub gamma: Option<f64>,
    pub gamma1: Option<f64>,
    pub ns: Option<Vec<u64>>,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub samples_per_axis: Option<usize>,
    pub datum: Option<DatumName>,
    pub path: Option<PathName>,
    pub r_max: Option<f64>,
    pub h: Option<f64>,
    pub k: Option<usize>,
    pub grid_kind: Option<GridKind>,
    /// Extra random polynomial trials in `verify`.
    pub random_trials: Option<usize>,
    /// Spectral coefficients for `evolve`, as written by `evolve` itself.
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    #[serde(default)]
    pub measure: Option<MeasureConfig>,
    /// Alternative to `measure`: path of a measure config file.
    #[serde(default)]
    pub measure_path: Option<PathBuf>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub knobs: Knobs,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command,
            measure: None,
            measure_path: None,
            output_dir: None,
            seed: 0,
            knobs: Knobs::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.measure.is_some() && self.measure_path.is_some() {
            return Err(Error::Config("give either `measure` or `measure_path`, not both".into()));
        }
        Ok(())
    }

    /// The configured measure, or the Gaussian of `default_dimension`.
    pub fn measure(&self, default_dimension: usize) -> Result<Measure> {
        let cfg = match (&self.measure, &self.measure_path) {
            (Some(m), _) => m.clone(),
            (None, Some(p)) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
            }
            (None, None) => MeasureConfig {
                family: FamilyName::Gaussian,
                params: Default::default(),
                dimension: default_dimension,
            },
        };
        Measure::from_config(&cfg).map_err(|e| match e {
            Error::Domain(s) | Error::Misuse(s) => Error::Config(s),
            other => other,
        })
    }
}

/// Parses "start:stop:count" into `count` evenly spaced values.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::Config(format!("grid `{spec}` is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_parsing() {
        let ok = r#"{"schema_version":1,"command":"verify","measure":{"family":"gaussian","dimension":5}}"#;
        let c = RunConfig::from_json(ok).unwrap();
        assert_eq!(c.command, Command::Verify);
        assert_eq!(c.measure(1).unwrap().dimension(), 5);
        for bad in [
            r#"{"schema_version":1,"command":"verify","colour":1}"#,
            r#"{"schema_version":2,"command":"verify"}"#,
            r#"{"schema_version":1,"command":"fly"}"#,
            r#"{"schema_version":1,"command":"verify","knobs":{"max_degre":3}}"#,
            r#"{"schema_version":1,"command":"verify","measure":{"family":"power","dimension":2,"params":{"n":4}}}"#,
        ] {
            let r = RunConfig::from_json(bad).and_then(|c| c.measure(1).map(|_| c));
            assert!(matches!(r, Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn rational_guard_is_config_error() {
        let c = r#"{"schema_version":1,"command":"hypotheses",
            "measure":{"family":"rational","dimension":5,"params":{"alpha":2,"beta":4}}}"#;
        let c = RunConfig::from_json(c).unwrap();
        assert!(matches!(c.measure(5), Err(Error::Config(_))));
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("-1:1:3").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(parse_grid("2:5:1").unwrap(), vec![2.0]);
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a:2:3").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
