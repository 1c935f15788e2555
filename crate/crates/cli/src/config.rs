//! Scenario files.
//!
//! ```toml
//! system = "rigid_body3"
//! initial_state = [1.0, 0.01, 0.0]
//!
//! [parameters]
//! inertia = [1.0, 2.0, 3.0]
//!
//! [integrator]
//! step = 1e-3
//! t_end = 10.0
//! record_every = 10
//!
//! [outputs]
//! trajectory_path = "rigid_body3.csv"
//! report_path = "rigid_body3.json"
//! ```
//!
//! Relative output paths are resolved against the directory holding the
//! scenario file.

use std::path::{Path, PathBuf};

use geomech::{IntegratorConfig, Vec3};
use serde::Deserialize;

use crate::error::CliError;
use crate::registry::{SystemKind, SystemSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub system: String,
    #[serde(default)]
    pub parameters: toml::Table,
    pub initial_state: Vec<f64>,
    pub integrator: IntegratorSection,
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    pub step: f64,
    pub t_end: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl From<IntegratorSection> for IntegratorConfig {
    fn from(s: IntegratorSection) -> Self {
        IntegratorConfig::new(s.step, s.t_end, s.record_every)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub trajectory_path: PathBuf,
    pub report_path: PathBuf,
    /// Final field `(x, m, u)` for `epdiff_pde`.
    #[serde(default)]
    pub snapshot_path: Option<PathBuf>,
}

impl OutputSection {
    pub fn resolved(&self, base: &Path) -> OutputSection {
        let join = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        OutputSection {
            trajectory_path: join(&self.trajectory_path),
            report_path: join(&self.report_path),
            snapshot_path: self.snapshot_path.as_deref().map(join),
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text)
            .map_err(|e| CliError::Validation(format!("malformed config: {}", one_line(&e.to_string()))))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn kind(&self) -> Result<SystemKind, CliError> {
        self.system.parse().map_err(CliError::Validation)
    }

    pub fn integrator_config(&self) -> Result<IntegratorConfig, CliError> {
        let cfg = IntegratorConfig::from(self.integrator);
        cfg.validate().map_err(|e| CliError::Validation(format!("integrator: {e}")))?;
        Ok(cfg)
    }

    /// Parameter accessor that knows which keys the chosen system accepts.
    pub fn params(&self) -> Result<Params<'_>, CliError> {
        let spec = self.kind()?.spec();
        for key in self.parameters.keys() {
            if !spec.accepts(key) {
                return Err(CliError::Validation(format!("{}: unknown parameter `{key}`", spec.name)));
            }
        }
        for key in spec.required {
            if !self.parameters.contains_key(*key) {
                return Err(CliError::Validation(format!("{}: missing required parameter `{key}`", spec.name)));
            }
        }
        Ok(Params { spec, table: &self.parameters })
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub struct Params<'a> {
    spec: &'static SystemSpec,
    table: &'a toml::Table,
}

impl Params<'_> {
    fn invalid(&self, key: &str, what: &str) -> CliError {
        CliError::Validation(format!("{}: parameter `{key}` {what}", self.spec.name))
    }

    fn missing(&self, key: &str) -> CliError {
        CliError::Validation(format!("{}: missing required parameter `{key}`", self.spec.name))
    }

    fn number(v: &toml::Value) -> Option<f64> {
        match v {
            toml::Value::Float(x) => Some(*x),
            toml::Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn f64_opt(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.table.get(key) {
            None => Ok(None),
            Some(v) => match Self::number(v) {
                Some(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(self.invalid(key, "must be a finite number")),
            },
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.f64_opt(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(key)?.unwrap_or(default))
    }

    pub fn positive(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        let x = match default {
            Some(d) => self.f64_or(key, d)?,
            None => self.f64(key)?,
        };
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.invalid(key, &format!("must be positive, got {x}")))
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.table.get(key) {
            None => Ok(default),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(_) => Err(self.invalid(key, "must be a non-negative integer")),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        if !self.table.contains_key(key) {
            return Err(self.missing(key));
        }
        self.usize_or(key, 0)
    }

    pub fn vec(&self, key: &str) -> Result<Vec<f64>, CliError> {
        let arr = self.table.get(key).ok_or_else(|| self.missing(key))?;
        let arr = arr.as_array().ok_or_else(|| self.invalid(key, "must be an array of numbers"))?;
        arr.iter()
            .map(|v| Self::number(v).filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| self.invalid(key, "must be an array of finite numbers"))
    }

    pub fn vec3(&self, key: &str) -> Result<Vec3, CliError> {
        let v = self.vec(key)?;
        Vec3::from_slice(&v).map_err(|_| self.invalid(key, &format!("must have 3 entries, got {}", v.len())))
    }

    pub fn str_or<'s>(&'s self, key: &str, default: &'s str) -> Result<&'s str, CliError> {
        match self.table.get(key) {
            None => Ok(default),
            Some(toml::Value::String(s)) => Ok(s),
            Some(_) => Err(self.invalid(key, "must be a string")),
        }
    }

    pub fn str(&self, key: &str) -> Result<&str, CliError> {
        match self.table.get(key) {
            None => Err(self.missing(key)),
            Some(toml::Value::String(s)) => Ok(s),
            Some(_) => Err(self.invalid(key, "must be a string")),
        }
    }
}
