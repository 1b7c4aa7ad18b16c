//! Run configuration: a structured plain-text file (TOML sections of
//! `key = value` pairs) plus command-line overrides; flags win over file
//! values. Unknown keys are rejected with the offending key named.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame::FdPolicy;
use crate::mass::radius_schedule;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Mass,
    Convergence,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format '{other}' (expected json|csv|both)")),
        }
    }
}

/// Fully resolved run configuration; every field has a documented default.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    /// Metric family name (default `flat`).
    pub metric: String,
    /// Family parameters (default empty).
    pub params: BTreeMap<String, f64>,
    /// Chart dimension (default 4).
    pub n: usize,
    /// Orders to evaluate (default `[1]`).
    pub k: Vec<usize>,
    /// Radius schedule (default `r0 = 10, factor = 2, count = 6`).
    pub radii: Vec<f64>,
    /// Sphere quadrature degree (default 24).
    pub quad_degree: usize,
    /// FD step policy, relative to radius (default `1e-4` for both the
    /// connection and exterior-derivative steps).
    pub fd: FdPolicy,
    /// Two-term extrapolation model (default false).
    pub two_term: bool,
    /// Output path stem (default `report` when writing is requested).
    pub out: Option<PathBuf>,
    /// Output format (default both).
    pub format: OutputFormat,
    /// Check names for `verify` (default `all`).
    pub checks: Vec<String>,
    /// Seed for sampled checks and the random_af family default
    /// (default 0).
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Mass,
            metric: "flat".to_string(),
            params: BTreeMap::new(),
            n: 4,
            k: vec![1],
            radii: radius_schedule(10.0, 2.0, 6),
            quad_degree: 24,
            fd: FdPolicy::default(),
            two_term: false,
            out: None,
            format: OutputFormat::Both,
            checks: vec!["all".to_string()],
            seed: 0,
        }
    }
}

/// On-disk layout of the configuration file. Every section and key is
/// optional; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub command: Option<Command>,
    pub n: Option<usize>,
    pub k: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub quad_degree: Option<usize>,
    pub two_term: Option<bool>,
    pub checks: Option<Vec<String>>,
    pub metric: Option<MetricSection>,
    pub radii: Option<RadiiSection>,
    pub fd: Option<FdSection>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    pub family: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiiSection {
    pub r0: Option<f64>,
    pub factor: Option<f64>,
    pub count: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdSection {
    pub conn_step_rel: Option<f64>,
    pub d_step_rel: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub out: Option<String>,
    pub format: Option<OutputFormat>,
}

impl RunConfig {
    /// Applies a parsed file config on top of the defaults.
    pub fn apply_file(&mut self, file: FileConfig) -> Result<(), ConfigError> {
        if let Some(c) = file.command {
            self.command = c;
        }
        if let Some(n) = file.n {
            self.n = n;
        }
        if let Some(k) = file.k {
            self.k = k;
        }
        if let Some(s) = file.seed {
            self.seed = s;
        }
        if let Some(d) = file.quad_degree {
            self.quad_degree = d;
        }
        if let Some(t) = file.two_term {
            self.two_term = t;
        }
        if let Some(c) = file.checks {
            self.checks = c;
        }
        if let Some(m) = file.metric {
            if let Some(f) = m.family {
                self.metric = f;
            }
            self.params.extend(m.params);
        }
        if let Some(r) = file.radii {
            let r0 = r.r0.unwrap_or(10.0);
            let factor = r.factor.unwrap_or(2.0);
            let count = r.count.unwrap_or(6);
            if r0 <= 0.0 || factor <= 1.0 || count == 0 {
                return Err(ConfigError::Invalid(format!(
                    "radii schedule r0 = {r0}, factor = {factor}, count = {count}"
                )));
            }
            self.radii = radius_schedule(r0, factor, count);
        }
        if let Some(f) = file.fd {
            if let Some(c) = f.conn_step_rel {
                self.fd.conn_step_rel = c;
            }
            if let Some(d) = f.d_step_rel {
                self.fd.d_step_rel = d;
            }
        }
        if let Some(o) = file.output {
            if let Some(path) = o.out {
                self.out = Some(PathBuf::from(path));
            }
            if let Some(fmt) = o.format {
                self.format = fmt;
            }
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &PathBuf) -> Result<(), ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.clone(), e))?;
        let parsed: FileConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        self.apply_file(parsed)
    }

    /// The seed is forwarded to `random_af` unless the family parameters
    /// already carry one.
    pub fn effective_params(&self) -> BTreeMap<String, f64> {
        let mut params = self.params.clone();
        if self.metric == "random_af" {
            params.entry("seed".to_string()).or_insert(self.seed as f64);
        }
        params
    }
}

/// Parses `r0,factor,count` into a radius schedule.
pub fn parse_radii(spec: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(ConfigError::Invalid(format!(
            "--radii expects r0,factor,count, got '{spec}'"
        )));
    }
    let r0: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("bad r0 '{}'", parts[0])))?;
    let factor: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("bad factor '{}'", parts[1])))?;
    let count: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("bad count '{}'", parts[2])))?;
    if count == 0 {
        return Err(ConfigError::Invalid("empty radius list".to_string()));
    }
    if r0 <= 0.0 || factor <= 1.0 {
        return Err(ConfigError::Invalid(format!(
            "radii schedule needs r0 > 0 and factor > 1, got {r0}, {factor}"
        )));
    }
    Ok(radius_schedule(r0, factor, count))
}

/// Parses a repeated `key=value` parameter flag.
pub fn parse_param(spec: &str) -> Result<(String, f64), ConfigError> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Invalid(format!("--param expects key=value, got '{spec}'")))?;
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("bad parameter value '{value}'")))?;
    Ok((key.trim().to_string(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_documented_values() {
        let c = RunConfig::default();
        assert_eq!(c.metric, "flat");
        assert_eq!(c.n, 4);
        assert_eq!(c.k, vec![1]);
        assert_eq!(c.radii.len(), 6);
        assert_eq!(c.quad_degree, 24);
    }

    #[test]
    fn file_overrides_and_unknown_key() {
        let mut c = RunConfig::default();
        let good: FileConfig = toml::from_str(
            r#"
            command = "mass"
            n = 3
            k = [1]
            [metric]
            family = "schwarzschild_isotropic"
            [metric.params]
            m = 2.0
            [radii]
            r0 = 20.0
            factor = 2.0
            count = 5
            "#,
        )
        .unwrap();
        c.apply_file(good).unwrap();
        assert_eq!(c.n, 3);
        assert_eq!(c.metric, "schwarzschild_isotropic");
        assert_eq!(c.params["m"], 2.0);
        assert_eq!(c.radii, vec![20.0, 40.0, 80.0, 160.0, 320.0]);

        let bad = toml::from_str::<FileConfig>("nn = 3");
        let err = bad.unwrap_err().to_string();
        assert!(err.contains("nn"), "error must name the key: {err}");
    }

    #[test]
    fn radii_and_param_parsing() {
        assert_eq!(parse_radii("10,2,3").unwrap(), vec![10.0, 20.0, 40.0]);
        assert!(parse_radii("10,2").is_err());
        assert!(parse_radii("10,0.5,3").is_err());
        let (k, v) = parse_param("m=1.5").unwrap();
        assert_eq!((k.as_str(), v), ("m", 1.5));
        assert!(parse_param("m").is_err());
    }
}
