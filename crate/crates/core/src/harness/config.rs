//! Flat `key = value` experiment configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::bridge::uniform_grid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub alpha: f64,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    /// Time window and number of grid points on it.
    pub a: f64,
    pub b: f64,
    pub grid_points: usize,
    pub output_path: Option<PathBuf>,
    /// Experiment-specific keys, including `tol.*` thresholds.
    pub params: BTreeMap<String, String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            alpha: 0.0,
            n: 50,
            samples: 1000,
            seed: 0,
            a: -0.5,
            b: 0.5,
            grid_points: 17,
            output_path: None,
            params: BTreeMap::new(),
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| config_err(format!("cannot parse {key} = {value:?}")))
}

impl ExperimentConfig {
    pub fn named(experiment: &str) -> Self {
        Self { experiment: experiment.to_string(), ..Self::default() }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| config_err(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if !seen.insert(k.to_string()) {
                return Err(config_err(format!("line {}: duplicate key {k}", lineno + 1)));
            }
            cfg.set(k, v.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = value.to_string(),
            "alpha" => self.alpha = parse_value(key, value)?,
            "n" | "N" => self.n = parse_value(key, value)?,
            "samples" => self.samples = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "a" => self.a = parse_value(key, value)?,
            "b" => self.b = parse_value(key, value)?,
            "grid_points" => self.grid_points = parse_value(key, value)?,
            "output" | "output_path" => self.output_path = Some(PathBuf::from(value)),
            "" => return Err(config_err("empty key")),
            _ => {
                self.params.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }

    /// Builder-style [`set`](Self::set) for code and tests.
    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.set(key, &value.to_string()).expect("valid config override");
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(config_err("samples must be >= 1"));
        }
        if self.grid_points < 2 {
            return Err(config_err("grid_points must be >= 2"));
        }
        if !(self.a < self.b) {
            return Err(config_err(format!("need a < b, got a = {}, b = {}", self.a, self.b)));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(config_err(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.a, self.b, self.grid_points - 1)
    }

    pub fn param<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.params.get(key) {
            Some(v) => parse_value(key, v),
            None => Ok(default),
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>> {
        match self.params.get(key) {
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v.split(',').map(|s| parse_value(key, s)).collect(),
            None => Ok(default.to_vec()),
        }
    }

    pub fn text_param(&self, key: &str, default: &str) -> String {
        self.params.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    /// Threshold `tol.<name>`.
    pub fn tolerance(&self, name: &str, default: f64) -> Result<f64> {
        self.param(&format!("tol.{name}"), default)
    }

    /// Canonical text form; parsing it gives back the same configuration.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "a = {}", self.a);
        let _ = writeln!(s, "b = {}", self.b);
        let _ = writeln!(s, "grid_points = {}", self.grid_points);
        if let Some(p) = &self.output_path {
            let _ = writeln!(s, "output = {}", p.display());
        }
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
