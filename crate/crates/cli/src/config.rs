//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use anyhow::{anyhow, bail, Result};
use tfqkd_core::verify::VerifyConfig;
use tfqkd_core::{Axis, BoundFault, ChannelModel, Error, LossLaw, ProtocolParams, SearchSpace};

/// Every setting a command can read. Field names double as config keys.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub trials: usize,
    pub threads: Option<usize>,

    pub distance: f64,
    pub lmin: f64,
    pub lmax: f64,
    pub lstep: f64,
    /// Explicit distance list; replaces the range when present.
    pub distances: Option<Vec<f64>>,

    pub ea: f64,
    pub eta_d: f64,
    pub p_d: f64,
    pub paper_channel: bool,

    pub mu: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub p_x: f64,
    pub f: f64,
    pub windows: u64,
    pub mc_windows: u64,
    pub test_fraction: f64,
    pub mu_max: Option<f64>,

    pub grid_points: usize,
    pub tolerance: f64,
    pub max_evaluations: usize,

    pub per_second: Option<f64>,
    pub inject_fault: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let search = SearchSpace::default();
        let verify = VerifyConfig::default();
        RunConfig {
            out: None,
            seed: 1,
            trials: verify.trials,
            threads: None,
            distance: 50.0,
            lmin: 0.0,
            lmax: 400.0,
            lstep: 10.0,
            distances: None,
            ea: 0.1,
            eta_d: tfqkd_core::channel::PAPER_DETECTOR_EFFICIENCY,
            p_d: tfqkd_core::channel::PAPER_DARK_COUNT,
            paper_channel: false,
            mu: verify.params.mu,
            epsilon: verify.params.epsilon,
            lambda: verify.params.lambda,
            p_x: verify.params.p_x,
            f: search.f,
            windows: search.n_windows,
            mc_windows: verify.params.n_windows,
            test_fraction: 0.0,
            mu_max: None,
            grid_points: search.mu.points,
            tolerance: search.tolerance,
            max_evaluations: search.max_evaluations,
            per_second: None,
            inject_fault: false,
        }
    }
}

/// Relative size of the corruption applied by `inject_fault`.
pub const FAULT_SIZE: f64 = 0.1;

/// Parse failures carry the 1-based line they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config line {n}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn parse_num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    v.parse::<T>().map_err(|e| format!("`{v}`: {e}"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn parse_optional<T: std::str::FromStr>(v: &str) -> Result<Option<T>, String>
where
    T::Err: fmt::Display,
{
    if v.is_empty() || v == "none" {
        Ok(None)
    } else {
        parse_num(v).map(Some)
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_num)
        .collect()
}

fn format_optional<T: fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

impl RunConfig {
    /// Applies one setting. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            "seed" => self.seed = parse_num(value)?,
            "trials" => self.trials = parse_num(value)?,
            "threads" => self.threads = parse_optional(value)?,
            "L" => self.distance = parse_num(value)?,
            "lmin" => self.lmin = parse_num(value)?,
            "lmax" => self.lmax = parse_num(value)?,
            "lstep" => self.lstep = parse_num(value)?,
            "distances" => self.distances = Some(parse_list(value)?),
            "ea" => self.ea = parse_num(value)?,
            "eta_d" => self.eta_d = parse_num(value)?,
            "p_d" => self.p_d = parse_num(value)?,
            "paper_channel" => self.paper_channel = parse_bool(value)?,
            "mu" => self.mu = parse_num(value)?,
            "epsilon" => self.epsilon = parse_num(value)?,
            "lambda" => self.lambda = parse_num(value)?,
            "p_x" => self.p_x = parse_num(value)?,
            "f" => self.f = parse_num(value)?,
            "windows" => self.windows = parse_num::<f64>(value).and_then(to_count)?,
            "mc_windows" => self.mc_windows = parse_num::<f64>(value).and_then(to_count)?,
            "test_fraction" => self.test_fraction = parse_num(value)?,
            "mu_max" => self.mu_max = parse_optional(value)?,
            "grid_points" => self.grid_points = parse_num(value)?,
            "tolerance" => self.tolerance = parse_num(value)?,
            "max_evaluations" => self.max_evaluations = parse_num(value)?,
            "per_second" => self.per_second = parse_optional(value)?,
            "inject_fault" => self.inject_fault = parse_bool(value)?,
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Parses config text on top of the defaults. Returns the line each key
    /// was set on, for attributing later validation failures.
    pub fn parse(text: &str) -> Result<(Self, BTreeMap<String, usize>), ConfigError> {
        let mut cfg = RunConfig::default();
        let mut lines = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError {
                line: Some(n),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            let key = key.trim();
            cfg.set(key, value.trim())
                .map_err(|m| err(format!("{key}: {m}")))?;
            lines.insert(key.to_string(), n);
        }
        Ok((cfg, lines))
    }

    /// The effective configuration in the format [`RunConfig::parse`] reads.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv(
            "out",
            self.out
                .as_ref()
                .map_or_else(String::new, |p| p.display().to_string()),
        );
        kv("seed", self.seed.to_string());
        kv("trials", self.trials.to_string());
        kv("threads", format_optional(&self.threads));
        kv("L", self.distance.to_string());
        kv("lmin", self.lmin.to_string());
        kv("lmax", self.lmax.to_string());
        kv("lstep", self.lstep.to_string());
        if let Some(d) = &self.distances {
            let list: Vec<String> = d.iter().map(f64::to_string).collect();
            kv("distances", list.join(", "));
        }
        kv("ea", self.ea.to_string());
        kv("eta_d", self.eta_d.to_string());
        kv("p_d", self.p_d.to_string());
        kv("paper_channel", self.paper_channel.to_string());
        kv("mu", self.mu.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("lambda", self.lambda.to_string());
        kv("p_x", self.p_x.to_string());
        kv("f", self.f.to_string());
        kv("windows", self.windows.to_string());
        kv("mc_windows", self.mc_windows.to_string());
        kv("test_fraction", self.test_fraction.to_string());
        kv("mu_max", format_optional(&self.mu_max));
        kv("grid_points", self.grid_points.to_string());
        kv("tolerance", self.tolerance.to_string());
        kv("max_evaluations", self.max_evaluations.to_string());
        kv("per_second", format_optional(&self.per_second));
        kv("inject_fault", self.inject_fault.to_string());
        s
    }

    pub fn channel(&self, distance_km: f64) -> ChannelModel {
        ChannelModel {
            distance_km,
            loss: if self.paper_channel {
                LossLaw::PAPER
            } else {
                LossLaw::STANDARD_FIBER
            },
            eta_d: self.eta_d,
            p_d: self.p_d,
            e_a: self.ea,
        }
    }

    /// Fixed operating point, for `simulate` and `verify`.
    pub fn params(&self, n_windows: u64) -> ProtocolParams {
        ProtocolParams {
            f: self.f,
            test_fraction: self.test_fraction,
            ..ProtocolParams::new(self.mu, self.epsilon, self.p_x, self.lambda)
                .with_windows(n_windows)
                .with_mu_max(self.mu_max)
        }
    }

    pub fn search_space(&self) -> SearchSpace {
        let d = SearchSpace::default();
        let n = self.grid_points;
        SearchSpace {
            mu: Axis { points: n, ..d.mu },
            epsilon: Axis {
                points: n,
                ..d.epsilon
            },
            lambda: Axis {
                points: n,
                ..d.lambda
            },
            p_x: Axis { points: n, ..d.p_x },
            f: self.f,
            n_windows: self.windows,
            test_fraction: self.test_fraction,
            mu_max: self.mu_max,
            tolerance: self.tolerance,
            max_evaluations: self.max_evaluations,
        }
    }

    pub fn verify_config(&self) -> VerifyConfig {
        VerifyConfig {
            params: self.params(self.mc_windows),
            channel: self.channel(self.distance),
            seed: self.seed,
            trials: self.trials,
            fault: if self.inject_fault {
                BoundFault::InflateCorrectClicks(FAULT_SIZE)
            } else {
                BoundFault::None
            },
            ..VerifyConfig::default()
        }
    }

    /// Sweep distances, in order.
    pub fn distance_list(&self) -> Result<Vec<f64>> {
        if let Some(d) = &self.distances {
            return Ok(d.clone());
        }
        if !(self.lstep > 0.0) {
            bail!("lstep must be > 0, got {}", self.lstep);
        }
        if self.lmax < self.lmin {
            return Ok(Vec::new());
        }
        let n = ((self.lmax - self.lmin) / self.lstep + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| self.lmin + i as f64 * self.lstep).collect())
    }

    /// Checks every derived model type, naming the config line of the
    /// offending key where there is one.
    pub fn validate(&self, lines: &BTreeMap<String, usize>) -> Result<()> {
        let attribute = |e: Error| -> anyhow::Error {
            let key = match &e {
                Error::Domain { name, .. } => config_key(name),
                _ => None,
            };
            match key.and_then(|k| lines.get(k)) {
                Some(&line) => anyhow!(ConfigError {
                    line: Some(line),
                    message: e.to_string(),
                }),
                None => anyhow!(e),
            }
        };
        self.channel(self.distance).validate().map_err(attribute)?;
        self.params(self.mc_windows.max(1))
            .validate()
            .map_err(attribute)?;
        self.search_space().validate().map_err(attribute)?;
        if self.grid_points == 0 {
            bail!("grid_points must be at least 1");
        }
        if let Some(r) = self.per_second {
            if !(r > 0.0 && r.is_finite()) {
                bail!("per_second must be a positive repetition rate, got {r}");
            }
        }
        for d in self.distance_list()? {
            self.channel(d).validate().map_err(attribute)?;
        }
        Ok(())
    }
}

fn to_count(v: f64) -> Result<u64, String> {
    if v >= 1.0 && v.fract() == 0.0 && v < 2f64.powi(64) {
        Ok(v as u64)
    } else {
        Err(format!("`{v}` is not a positive whole number"))
    }
}

/// Config key behind a model-level parameter name.
fn config_key(name: &str) -> Option<&'static str> {
    Some(match name {
        "mu" => "mu",
        "epsilon" => "epsilon",
        "p_x" => "p_x",
        "lambda" => "lambda",
        "f" => "f",
        "mu_max" => "mu_max",
        "test_fraction" => "test_fraction",
        "L" => "L",
        "E_a" => "ea",
        "eta_d" => "eta_d",
        "p_d" => "p_d",
        "tolerance" => "tolerance",
        _ => return None,
    })
}
