//! Flat key=value experiment configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use trem_core::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    SpectralSuite,
    CloudCensus,
    ClockConvergence,
    AgingCurve,
    HightempLln,
    ConditionCheck,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::SpectralSuite,
        ExperimentKind::CloudCensus,
        ExperimentKind::ClockConvergence,
        ExperimentKind::AgingCurve,
        ExperimentKind::HightempLln,
        ExperimentKind::ConditionCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SpectralSuite => "spectral-suite",
            ExperimentKind::CloudCensus => "cloud-census",
            ExperimentKind::ClockConvergence => "clock-convergence",
            ExperimentKind::AgingCurve => "aging-curve",
            ExperimentKind::HightempLln => "hightemp-lln",
            ExperimentKind::ConditionCheck => "condition-check",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ConfigError(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub params: ModelParams,
    pub kind: ExperimentKind,
    pub t: f64,
    pub replicas: u64,
    pub u_grid: Vec<f64>,
    pub rho: f64,
    pub workers: usize,
    pub out: PathBuf,
}

/// 16 log-spaced points in [0.25, 8].
pub fn default_u_grid() -> Vec<f64> {
    let (a, b) = (0.25f64.ln(), 8.0f64.ln());
    (0..16).map(|i| (a + (b - a) * i as f64 / 15.0).exp()).collect()
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, params: ModelParams) -> Self {
        ExperimentConfig {
            params,
            kind,
            t: 1.0,
            replicas: 1000,
            u_grid: default_u_grid(),
            rho: 0.25,
            workers: 1,
            out: PathBuf::from("out"),
        }
    }

    pub fn with_replicas(mut self, replicas: u64) -> Self {
        self.replicas = replicas;
        self
    }

    /// Apply `key=value` pairs, then validate.
    pub fn apply(&mut self, pairs: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        fn num<T: FromStr>(k: &str, v: &str) -> Result<T, ConfigError> {
            v.trim().parse().map_err(|_| ConfigError(format!("bad value `{v}` for `{k}`")))
        }
        match key {
            "n" => self.params.n = num(key, value)?,
            "cstar" | "c_star" => self.params.c_star = num(key, value)?,
            "beta" => self.params.beta = num(key, value)?,
            "epsilon" => self.params.epsilon = num(key, value)?,
            "seed" => self.params.seed = num(key, value)?,
            "kind" => self.kind = value.trim().parse()?,
            "t" => self.t = num(key, value)?,
            "replicas" => self.replicas = num(key, value)?,
            "rho" => self.rho = num(key, value)?,
            "workers" => self.workers = num(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "u_grid" => {
                self.u_grid = value
                    .split(',')
                    .map(|s| num::<f64>(key, s))
                    .collect::<Result<Vec<_>, _>>()?
            }
            _ => return Err(ConfigError(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate().map_err(|e| ConfigError(e.to_string()))?;
        if self.replicas < 1 {
            return Err(ConfigError("replicas must be at least 1".into()));
        }
        if !(self.t > 0.0) {
            return Err(ConfigError("horizon t must be positive".into()));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(ConfigError("rho must lie in (0, 1)".into()));
        }
        if self.u_grid.is_empty() || self.u_grid.iter().any(|u| !(*u > 0.0)) {
            return Err(ConfigError("u_grid must hold positive values".into()));
        }
        Ok(())
    }

    /// Echo as ordered key=value pairs.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let grid: Vec<String> = self.u_grid.iter().map(|u| format!("{u}")).collect();
        vec![
            ("kind".into(), self.kind.to_string()),
            ("n".into(), p.n.to_string()),
            ("cstar".into(), p.c_star.to_string()),
            ("beta".into(), p.beta.to_string()),
            ("epsilon".into(), p.epsilon.to_string()),
            ("seed".into(), p.seed.to_string()),
            ("t".into(), self.t.to_string()),
            ("replicas".into(), self.replicas.to_string()),
            ("rho".into(), self.rho.to_string()),
            ("workers".into(), self.workers.to_string()),
            ("u_grid".into(), grid.join(",")),
            ("out".into(), self.out.display().to_string()),
        ]
    }
}

/// Parse a key=value file; `#` starts a comment, blank lines are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key=value", no + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}
