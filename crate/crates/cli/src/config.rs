//! Scenario files: one JSON document, optionally patched by `--a.b value` flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qbd_core::propagator::BathParams;
use qbd_core::states::{
    make_cat_state, make_displaced_gaussian, make_gaussian, make_gaussian_ac, make_mehler_thermal,
};
use qbd_core::GaussianMixtureState;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Gaussian { sigma: f64 },
    GaussianAc { a: f64, c: f64 },
    Displaced { a: f64, c: f64, b: f64 },
    Cat { sigma: f64, r: f64 },
    Mehler { u: f64, omega0: f64 },
}

impl StateSpec {
    pub fn build(&self, hbar: f64, mass: f64) -> Result<GaussianMixtureState, CliError> {
        let state = match *self {
            Self::Gaussian { sigma } => make_gaussian(sigma),
            Self::GaussianAc { a, c } => make_gaussian_ac(a, c),
            Self::Displaced { a, c, b } => make_displaced_gaussian(a, c, b),
            Self::Cat { sigma, r } => make_cat_state(sigma, r),
            Self::Mehler { u, omega0 } => make_mehler_thermal(u, omega0, hbar, mass, true),
        };
        state.map_err(|e| CliError::Validation(format!("state: {e}")))
    }

    /// `(a, c)` when the state is a single centered Gaussian kernel.
    pub fn centered_ac(&self, hbar: f64, mass: f64) -> Option<(f64, f64)> {
        match *self {
            Self::Gaussian { sigma } => Some((1.0 / (sigma * sigma), 0.0)),
            Self::GaussianAc { a, c } => Some((a, c)),
            Self::Displaced { .. } | Self::Cat { .. } => None,
            Self::Mehler { u, omega0 } => Some(qbd_core::states::mehler_coefficients(u, omega0, hbar, mass)),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            Self::GaussianAc { a, c } => format!("gaussian_ac(a={a}, c={c})"),
            Self::Displaced { a, c, b } => format!("displaced(a={a}, c={c}, b={b})"),
            Self::Cat { sigma, r } => format!("cat(sigma={sigma}, r={r})"),
            Self::Mehler { u, omega0 } => format!("mehler(u={u}, omega0={omega0})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSpec {
    pub gamma: f64,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl BathSpec {
    pub fn params(&self) -> Result<BathParams, CliError> {
        let bath = match (self.d, self.temperature) {
            (Some(d), None) => BathParams::with_units(self.gamma, d, self.hbar, self.mass),
            (None, Some(kt)) => BathParams::from_temperature(self.gamma, kt, self.hbar, self.mass),
            _ => {
                return Err(CliError::Validation(
                    "bath: give exactly one of `D` and `temperature`".into(),
                ))
            }
        };
        bath.map_err(|e| CliError::Validation(format!("bath: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub n_points: usize,
    #[serde(default = "log_spacing")]
    pub spacing: Spacing,
}

fn log_spacing() -> Spacing {
    Spacing::Log
}

impl SweepSpec {
    pub fn times(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => qbd_core::survival::log_spaced(self.t_min, self.t_max, self.n_points),
            Spacing::Linear => qbd_core::survival::linear_spaced(self.t_min, self.t_max, self.n_points),
        }
    }
}

/// Grid-oracle settings for `verify`; unset fields are sized automatically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Defaults to `50 τ_D`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max_grid: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default = "csv_format")]
    pub format: OutputFormat,
}

fn csv_format() -> OutputFormat {
    OutputFormat::Csv
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub state: StateSpec,
    pub bath: BathSpec,
    pub sweep: SweepSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl Default for ScenarioConfig {
    /// The gaussian `σ = 1` in the `γ = 1e−3`, `D = 100` bath, swept over ten decades.
    fn default() -> Self {
        Self {
            state: StateSpec::Gaussian { sigma: 1.0 },
            bath: BathSpec {
                gamma: 1e-3,
                d: Some(100.0),
                temperature: None,
                hbar: 1.0,
                mass: 1.0,
            },
            sweep: SweepSpec {
                t_min: 1e-3,
                t_max: 1e7,
                n_points: 200,
                spacing: Spacing::Log,
            },
            oracle: Some(OracleSpec {
                n: 512,
                l: None,
                dt: None,
                t_max_grid: None,
            }),
            output: None,
        }
    }
}

impl ScenarioConfig {
    /// Parses `text`, applies `overrides` and validates the result.
    pub fn from_json(text: &str, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let mut doc: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("config line {}, column {}: {e}", e.line(), e.column())))?;
        for (path, value) in overrides {
            set_path(&mut doc, path, parse_override(value))?;
        }
        let cfg: Self =
            serde_json::from_value(doc).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.sweep;
        if s.n_points == 0 {
            return Err(CliError::Validation("sweep.nPoints: must be at least 1".into()));
        }
        if !(s.t_min.is_finite() && s.t_max.is_finite() && s.t_max >= s.t_min) {
            return Err(CliError::Validation("sweep: need finite tMin <= tMax".into()));
        }
        if s.spacing == Spacing::Log && !(s.t_min > 0.0) {
            return Err(CliError::Validation("sweep.tMin: must be > 0 for log spacing".into()));
        }
        if s.t_min < 0.0 {
            return Err(CliError::Validation("sweep.tMin: must be >= 0".into()));
        }
        if let Some(o) = &self.oracle {
            if !o.n.is_power_of_two() || o.n < 8 {
                return Err(CliError::Validation(format!("oracle.N: {} is not a power of two >= 8", o.n)));
            }
        }
        self.bath.params()?;
        self.state.build(self.bath.hbar, self.bath.mass)?;
        Ok(())
    }
}

/// JSON literal if it parses as one, otherwise a bare string.
fn parse_override(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_owned()))
}

fn set_path(doc: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Validation(format!("override `--{path}`: empty path segment")));
    }
    for (i, part) in parts.iter().enumerate() {
        let Value::Object(map) = node else {
            return Err(CliError::Validation(format!(
                "override `--{path}`: `{}` is not an object",
                parts[..i].join(".")
            )));
        };
        if i + 1 == parts.len() {
            map.insert((*part).to_owned(), value);
            return Ok(());
        }
        node = map
            .entry((*part).to_owned())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Splits trailing `--a.b value` / `--a.b=value` arguments into pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(CliError::Validation(format!("unexpected argument `{arg}`")));
        };
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_owned(), v.to_owned())),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Validation(format!("override `--{key}` needs a value")))?;
                out.push((key.to_owned(), v.clone()));
            }
        }
    }
    Ok(out)
}
