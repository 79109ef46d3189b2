//! Flat, typed parameter sets with `section.key` names.
//!
//! A scenario declares its defaults; a TOML file (one table per section) and
//! `key=value` overrides may only change keys that already exist, and only to
//! a value of the same type.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{ExpTerm, Kernel};
use crate::linalg::{Mat, Vector};
use crate::smc_design::LinearIdePlant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Text(_) => "string",
        }
    }

    /// Parses `raw` as a value of the same type as `self`.
    fn parse_like(&self, raw: &str) -> Option<Value> {
        let raw = raw.trim();
        match self {
            Value::Bool(_) => raw.parse().ok().map(Value::Bool),
            Value::Int(_) => raw.parse().ok().map(Value::Int),
            Value::Float(_) => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Value::Float),
            Value::Text(_) => Some(Value::Text(raw.trim_matches('"').to_string())),
        }
    }

    fn coerce_like(&self, v: &toml::Value) -> Option<Value> {
        match (self, v) {
            (Value::Bool(_), toml::Value::Boolean(b)) => Some(Value::Bool(*b)),
            (Value::Int(_), toml::Value::Integer(i)) => Some(Value::Int(*i)),
            (Value::Float(_), toml::Value::Float(f)) => Some(Value::Float(*f)),
            (Value::Float(_), toml::Value::Integer(i)) => Some(Value::Float(*i as f64)),
            (Value::Text(_), toml::Value::String(s)) => Some(Value::Text(s.clone())),
            _ => None,
        }
    }

    fn to_toml(&self) -> toml::Value {
        match self {
            Value::Bool(b) => toml::Value::Boolean(*b),
            Value::Int(i) => toml::Value::Integer(*i),
            Value::Float(f) => toml::Value::Float(*f),
            Value::Text(s) => toml::Value::String(s.clone()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(v) => write!(f, "{v:?}"),
            Value::Text(s) => write!(f, "{s:?}"),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Params {
    entries: BTreeMap<String, Value>,
}

impl Params {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares a key with its default value.
    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        debug_assert!(key.contains('.'), "parameter keys are `section.key`");
        self.entries.insert(key.to_string(), value.into());
        self
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn lookup(&self, key: &str) -> Result<&Value> {
        self.entries
            .get(key)
            .ok_or_else(|| Error::Config(format!("unknown parameter `{key}`")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        match self.lookup(key)? {
            Value::Float(v) => Ok(*v),
            Value::Int(v) => Ok(*v as f64),
            other => Err(Error::Config(format!(
                "`{key}` is a {}, expected a number",
                other.type_name()
            ))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        match self.lookup(key)? {
            Value::Int(v) if *v >= 0 => Ok(*v as usize),
            other => Err(Error::Config(format!(
                "`{key}` = {other} is not a nonnegative integer"
            ))),
        }
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.lookup(key)? {
            Value::Bool(v) => Ok(*v),
            other => Err(Error::Config(format!(
                "`{key}` is a {}, expected a bool",
                other.type_name()
            ))),
        }
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        match self.lookup(key)? {
            Value::Text(v) => Ok(v),
            other => Err(Error::Config(format!(
                "`{key}` is a {}, expected a string",
                other.type_name()
            ))),
        }
    }

    /// Applies one `section.key=value` override.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "override `{assignment}` is not of the form key=value"
            ))
        })?;
        let key = key.trim();
        let current = self.lookup(key).map_err(|_| self.unknown(key))?;
        let value = current.parse_like(raw).ok_or_else(|| {
            Error::Config(format!(
                "`{key}` expects a {}, got `{}`",
                current.type_name(),
                raw.trim()
            ))
        })?;
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        overrides
            .iter()
            .try_for_each(|o| self.set_override(o.as_ref()))
    }

    /// Merges one TOML table per section. Tables not declared by any key are
    /// skipped when listed in `foreign`.
    pub fn merge_toml(&mut self, table: &toml::Table, foreign: &[&str]) -> Result<()> {
        for (section, body) in table {
            if foreign.contains(&section.as_str()) {
                continue;
            }
            let toml::Value::Table(body) = body else {
                return Err(Error::Config(format!(
                    "top-level key `{section}` must be a [section] table"
                )));
            };
            for (name, v) in body {
                let key = format!("{section}.{name}");
                let current = self.lookup(&key).map_err(|_| self.unknown(&key))?;
                let value = current.coerce_like(v).ok_or_else(|| {
                    Error::Config(format!(
                        "`{key}` expects a {}, got `{v}`",
                        current.type_name()
                    ))
                })?;
                self.entries.insert(key, value);
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        let mut root = toml::Table::new();
        for (key, value) in &self.entries {
            let (section, name) = key.split_once('.').unwrap_or(("params", key));
            let entry = root
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let toml::Value::Table(t) = entry {
                t.insert(name.to_string(), value.to_toml());
            }
        }
        toml::to_string(&root).unwrap_or_default()
    }

    fn unknown(&self, key: &str) -> Error {
        let known: Vec<&str> = self.keys().collect();
        Error::Config(format!(
            "unknown parameter `{key}`; known: {}",
            known.join(", ")
        ))
    }
}

/// A run file: top-level `scenario` and `output`, plus parameter sections.
#[derive(Debug, Clone, Default)]
pub struct RunFile {
    pub scenario: Option<String>,
    pub output: Option<String>,
    pub sections: toml::Table,
}

impl RunFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let mut take = |name: &str| -> Result<Option<String>> {
            match table.remove(name) {
                None => Ok(None),
                Some(toml::Value::String(s)) => Ok(Some(s)),
                Some(other) => Err(Error::Config(format!(
                    "`{name}` must be a string, got `{other}`"
                ))),
            }
        };
        let scenario = take("scenario")?;
        let output = take("output")?;
        Ok(Self {
            scenario,
            output,
            sections: table,
        })
    }
}

/// Kernel declaration by kind tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Zero,
    /// `amplitude * I` on lags `[0, delay]`.
    Window {
        delay: f64,
        amplitude: f64,
    },
    ExponentialSeries {
        terms: Vec<TermSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub rate: f64,
    pub coeff: Vec<Vec<f64>>,
}

impl KernelSpec {
    pub fn build(&self, dim: usize) -> Result<Kernel> {
        match self {
            KernelSpec::Zero => Ok(Kernel::zero(dim)),
            KernelSpec::Window { delay, amplitude } => Kernel::window(dim, *delay, *amplitude),
            KernelSpec::ExponentialSeries { terms } => {
                let terms = terms
                    .iter()
                    .map(|t| {
                        Ok(ExpTerm {
                            rate: t.rate,
                            coeff: matrix("kernel coefficient", &t.coeff)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Kernel::exponential_series(dim, terms)
            }
        }
    }
}

/// An inline linear IDE plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub b_tilde: Option<Vec<Vec<f64>>>,
    pub c: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub gamma_bar: f64,
    pub kernel: KernelSpec,
}

impl PlantSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("plant: {e}")))
    }

    /// The plant with `B~ = B` unless given, and `gamma_bar` as declared.
    pub fn build(&self) -> Result<LinearIdePlant> {
        let b = matrix("b", &self.b)?;
        let b_tilde = match &self.b_tilde {
            Some(rows) => matrix("b_tilde", rows)?,
            None => b.clone(),
        };
        let a = matrix("a", &self.a)?;
        if self.x0.len() != a.nrows() {
            return Err(Error::Config(format!(
                "x0 has {} entries for {} states",
                self.x0.len(),
                a.nrows()
            )));
        }
        let kernel = self.kernel.build(a.nrows())?;
        let mut plant = LinearIdePlant::new(a, b, b_tilde, matrix("c", &self.c)?, kernel)?;
        if !(self.gamma_bar >= 0.0 && self.gamma_bar.is_finite()) {
            return Err(Error::Config(
                "gamma_bar must be finite and nonnegative".into(),
            ));
        }
        plant.gamma_bar = self.gamma_bar;
        Ok(plant)
    }

    pub fn x0(&self) -> Vector {
        Vector::from_column_slice(&self.x0)
    }
}

/// Builds a matrix from rows, checking they are rectangular and nonempty.
pub fn matrix(what: &str, rows: &[Vec<f64>]) -> Result<Mat> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!(
            "{what} must be a nonempty rectangular array of rows"
        )));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Params {
        Params::new()
            .with("sim.h", 1e-3)
            .with("sim.steps", 10i64)
            .with("law.kind", "relay")
            .with("check.strict", true)
    }

    #[test]
    fn overrides_keep_types() {
        let mut p = sample();
        p.apply_overrides(&[
            "sim.h=5e-4",
            "sim.steps=20",
            "law.kind=unit",
            "check.strict=false",
        ])
        .unwrap();
        assert_eq!(p.f64("sim.h").unwrap(), 5e-4);
        assert_eq!(p.usize("sim.steps").unwrap(), 20);
        assert_eq!(p.text("law.kind").unwrap(), "unit");
        assert!(!p.bool("check.strict").unwrap());
    }

    #[test]
    fn overrides_must_reference_existing_keys() {
        let mut p = sample();
        let err = p.set_override("sim.dt=1").unwrap_err().to_string();
        assert!(err.contains("sim.dt") && err.contains("sim.h"));
        assert!(p.set_override("sim.steps=1.5").is_err());
        assert!(p.set_override("sim.h=fast").is_err());
        assert!(p.set_override("sim.h=inf").is_err());
        assert!(p.set_override("no-equals").is_err());
    }

    #[test]
    fn toml_merge_and_round_trip() {
        let mut p = sample();
        let file =
            RunFile::parse("scenario = \"relay-scalar\"\n[sim]\nh = 1\nsteps = 4\n").unwrap();
        assert_eq!(file.scenario.as_deref(), Some("relay-scalar"));
        p.merge_toml(&file.sections, &[]).unwrap();
        assert_eq!(p.f64("sim.h").unwrap(), 1.0);
        let text = p.to_toml();
        let mut q = sample();
        q.merge_toml(&text.parse().unwrap(), &[]).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn toml_merge_rejects_unknown_and_mistyped() {
        let mut p = sample();
        assert!(p
            .merge_toml(&"[sim]\nhh = 1.0\n".parse().unwrap(), &[])
            .is_err());
        assert!(p
            .merge_toml(&"[sim]\nsteps = 1.0\n".parse().unwrap(), &[])
            .is_err());
        assert!(p
            .merge_toml(&"[plant]\na = 1\n".parse().unwrap(), &["plant"])
            .is_ok());
    }

    #[test]
    fn plant_spec_parses() {
        let text = r#"
            a = [[-1.0]]
            b = [[1.0]]
            c = [[1.0]]
            x0 = [1.0]
            [kernel]
            kind = "exponential_series"
            terms = [{ rate = 2.0, coeff = [[0.5]] }]
        "#;
        let spec: PlantSpec = toml::from_str(text).unwrap();
        let k = spec.kernel.build(1).unwrap();
        assert!((k.eval_lag(0.0).unwrap()[(0, 0)] - 0.5).abs() < 1e-15);
        assert!(matrix("a", &[vec![1.0], vec![]]).is_err());
        let plant = spec.build().unwrap();
        assert_eq!(plant.b_tilde, plant.b);
        assert_eq!(spec.x0().len(), 1);
    }
}
