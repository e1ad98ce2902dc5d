//! Experiment configuration files.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use latwalk::fit::Gate;
use latwalk::Multiplier;
use serde::{Deserialize, Serialize};

pub const CONFIG_SCHEMA: &str = "latwalk-experiment/1";

/// Known keys of the `tolerances` table.
pub const TOLERANCE_KEYS: &[&str] = &["tail", "reconstruction", "identity", "duhamel", "agreement"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: String,
    pub experiment: String,
    pub n: usize,
    /// Torus samples per axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default)]
    pub ladders: Ladders,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<MultiplierSpec>,
    #[serde(default)]
    pub params: Params,
    /// Replaces the experiment's primary gate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<GateSpec>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn yes() -> bool {
    true
}

fn unit() -> f64 {
    1.0
}

/// Parameter ladders; an absent ladder takes the experiment default.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladders {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

/// Scalar knobs; each experiment reads the ones it needs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    /// Point budget for adaptive grids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MultiplierSpec {
    Bump {
        lo: f64,
        hi: f64,
        #[serde(default = "unit")]
        steepness: f64,
    },
    Gaussian { sigma: f64 },
    Indicator { lo: f64, hi: f64 },
    Constant { value: f64, lo: f64, hi: f64 },
    Zero,
}

impl MultiplierSpec {
    pub fn build(&self) -> Multiplier {
        match *self {
            MultiplierSpec::Bump { lo, hi, steepness } => Multiplier::bump_steep(lo, hi, steepness),
            MultiplierSpec::Gaussian { sigma } => Multiplier::gaussian(sigma),
            MultiplierSpec::Indicator { lo, hi } => Multiplier::indicator(lo, hi),
            MultiplierSpec::Constant { value, lo, hi } => Multiplier::constant(value, lo, hi),
            MultiplierSpec::Zero => Multiplier::zero(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match *self {
            MultiplierSpec::Bump { lo, hi, .. } | MultiplierSpec::Indicator { lo, hi } | MultiplierSpec::Constant { lo, hi, .. }
                if !(lo < hi && lo.is_finite() && hi.is_finite()) =>
            {
                Err(format!("support [{lo}, {hi}] is empty or not finite"))
            }
            MultiplierSpec::Gaussian { sigma } if !(sigma > 0.0) => Err(format!("sigma = {sigma} must be positive")),
            MultiplierSpec::Bump { steepness, .. } if !(steepness > 0.0) => Err(format!("steepness = {steepness} must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GateSpec {
    Within { target: f64, tol: f64 },
    AtMost { bound: f64 },
    AtLeast { bound: f64 },
}

impl From<GateSpec> for Gate {
    fn from(g: GateSpec) -> Gate {
        match g {
            GateSpec::Within { target, tol } => Gate::Within { target, tol },
            GateSpec::AtMost { bound } => Gate::AtMost { bound },
            GateSpec::AtLeast { bound } => Gate::AtLeast { bound },
        }
    }
}

/// A rejected configuration, with the source position when parsing failed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError { path: None, line: None, column: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}", p.display())?;
            if let (Some(l), Some(c)) = (self.line, self.column) {
                write!(f, ":{l}:{c}")?;
            }
            write!(f, ": ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError {
            path: None,
            line: Some(e.line()),
            column: Some(e.column()),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: Some(path.to_path_buf()),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::from_json(&text).map_err(|mut e| {
            e.path = Some(path.to_path_buf());
            e
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema != CONFIG_SCHEMA {
            return Err(ConfigError::new(format!("schema must be \"{CONFIG_SCHEMA}\", got \"{}\"", self.schema)));
        }
        if !(1..=3).contains(&self.n) {
            return Err(ConfigError::new(format!("n = {} must be 1, 2 or 3", self.n)));
        }
        if let Some(m) = self.grid {
            if m < 8 || m % 2 != 0 {
                return Err(ConfigError::new(format!("grid = {m} must be even and at least 8")));
            }
        }
        let l = &self.ladders;
        let lens = [
            ("ladders.k", l.k.as_ref().map(Vec::len)),
            ("ladders.t", l.t.as_ref().map(Vec::len)),
            ("ladders.lambda", l.lambda.as_ref().map(Vec::len)),
            ("ladders.radius", l.radius.as_ref().map(Vec::len)),
            ("ladders.alpha", l.alpha.as_ref().map(Vec::len)),
        ];
        for (name, len) in lens {
            if len == Some(0) {
                return Err(ConfigError::new(format!("{name} is empty")));
            }
        }
        let finite = [&l.t, &l.lambda, &l.radius, &l.alpha];
        if finite.iter().any(|v| v.as_ref().is_some_and(|v| v.iter().any(|x| !x.is_finite()))) {
            return Err(ConfigError::new("ladder values must be finite"));
        }
        for (key, value) in &self.tolerances {
            if !TOLERANCE_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::new(format!(
                    "unknown tolerance \"{key}\" (known: {})",
                    TOLERANCE_KEYS.join(", ")
                )));
            }
            if !(*value > 0.0) {
                return Err(ConfigError::new(format!("tolerances.{key} = {value} must be positive")));
            }
        }
        if let Some(m) = &self.multiplier {
            m.validate().map_err(|e| ConfigError::new(format!("multiplier: {e}")))?;
        }
        if let Some(GateSpec::Within { tol, .. }) = self.gate {
            if !(tol > 0.0) {
                return Err(ConfigError::new("gate tolerance must be positive"));
            }
        }
        if self.workers == Some(0) {
            return Err(ConfigError::new("workers must be at least 1"));
        }
        Ok(())
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> String {
        r#"{"schema": "latwalk-experiment/1", "experiment": "heat-kernel", "n": 1}"#.to_string()
    }

    #[test]
    fn minimal_config_parses() {
        let c = ExperimentConfig::from_json(&base()).unwrap();
        assert_eq!(c.seed, 0);
        assert!(c.plots);
    }

    #[test]
    fn errors_carry_positions() {
        let text = "{\n  \"schema\": \"latwalk-experiment/1\",\n  \"experiment\": \"heat-kernel\",\n  \"n\": 1,\n  \"bogus\": 3\n}";
        let e = ExperimentConfig::from_json(text).unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.message.contains("bogus"));
    }

    #[test]
    fn validation_rules() {
        let with = |extra: &str| base().replace("\"n\": 1", &format!("\"n\": 1, {extra}"));
        assert!(ExperimentConfig::from_json(&with(r#""ladders": {"k": []}"#)).unwrap_err().message.contains("ladders.k"));
        assert!(ExperimentConfig::from_json(&with(r#""tolerances": {"tail": -1}"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""tolerances": {"slack": 1}"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""multiplier": {"kind": "bump", "lo": 1, "hi": 0}"#)).is_err());
        assert!(ExperimentConfig::from_json(&with(r#""gate": {"within": {"target": -5, "tol": 0.1}}"#)).is_ok());
        assert!(ExperimentConfig::from_json(&base().replace("/1", "/9")).is_err());
    }
}
