//! Flat `key = value` experiment configuration.
//!
//! One assignment per line; `#` starts a comment. Lists are comma
//! separated. `t_end` and `stationary_tol` accept `none` to clear the
//! preset default.

use std::fmt;
use std::path::{Path, PathBuf};

use mfem_core::integrator::{Mode, RunConfig};
use mfem_core::problem::{preset_by_name, Preset};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    pub fn new(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Per-run settings layered over the preset defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub delta: Option<f64>,
    pub delta_tilde: Option<f64>,
    pub t_end: Option<Option<f64>>,
    pub stationary_tol: Option<Option<f64>>,
    pub snapshot_times: Option<Vec<f64>>,
    pub mode: Option<Mode>,
    pub max_halvings: Option<u32>,
    pub record_every: Option<usize>,
}

#[derive(Clone)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub n_list: Vec<usize>,
    pub overrides: Overrides,
    pub out: PathBuf,
    pub seed: u64,
}

impl fmt::Debug for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExperimentConfig")
            .field("preset", &self.preset.name)
            .field("n_list", &self.n_list)
            .field("overrides", &self.overrides)
            .field("out", &self.out)
            .field("seed", &self.seed)
            .finish()
    }
}

impl ExperimentConfig {
    pub fn mode(&self) -> Mode {
        self.overrides.mode.unwrap_or(Mode::Moving)
    }

    /// Run configuration for one `N` in the given mode.
    pub fn run_config(&self, n: usize, mode: Mode) -> RunConfig {
        let o = &self.overrides;
        let mut c = RunConfig::from_preset(&self.preset, n);
        c.mode = mode;
        if let Some(v) = o.dt {
            c.dt = v;
        }
        if let Some(v) = o.delta {
            c.delta = v;
        }
        if let Some(v) = o.delta_tilde {
            c.delta_tilde = v;
        }
        if let Some(v) = o.t_end {
            c.t_end = v;
        }
        if let Some(v) = o.stationary_tol {
            c.stationary_tol = v;
        }
        if let Some(v) = &o.snapshot_times {
            c.snapshot_times = v.clone();
        }
        if let Some(v) = o.max_halvings {
            c.max_halvings = v;
        }
        if let Some(v) = o.record_every {
            c.record_every = v;
        }
        c
    }

    /// Check every run configuration the experiment would use.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::new("n_list must be strictly increasing"));
        }
        for &n in &self.n_list {
            self.run_config(n, self.mode()).validate().map_err(|e| ConfigError::new(format!("N = {n}: {e}")))?;
        }
        Ok(())
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ConfigError::at(line, format!("{key}: `{v}` is not a finite number")))
}

fn parse_optional(line: usize, key: &str, v: &str) -> Result<Option<f64>, ConfigError> {
    if v.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse_f64(line, key, v).map(Some)
    }
}

fn parse_int<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse::<T>().map_err(|_| ConfigError::at(line, format!("{key}: `{v}` is not a non-negative integer")))
}

fn parse_list<T>(v: &str, mut item: impl FnMut(&str) -> Result<T, ConfigError>) -> Result<Vec<T>, ConfigError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(&mut item).collect()
}

/// Parse configuration text. `base_dir` anchors a relative `out`.
pub fn parse(text: &str, base_dir: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut preset = None;
    let mut n_list = None;
    let mut overrides = Overrides::default();
    let mut out = None;
    let mut seed = 0u64;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
        match key {
            "preset" => {
                preset = Some(preset_by_name(value).map_err(|e| ConfigError::at(line, e.to_string()))?);
            }
            "n_list" => n_list = Some(parse_list(value, |s| parse_int::<usize>(line, key, s))?),
            "dt" => overrides.dt = Some(parse_f64(line, key, value)?),
            "delta" => overrides.delta = Some(parse_f64(line, key, value)?),
            "delta_tilde" => overrides.delta_tilde = Some(parse_f64(line, key, value)?),
            "t_end" => overrides.t_end = Some(parse_optional(line, key, value)?),
            "stationary_tol" => overrides.stationary_tol = Some(parse_optional(line, key, value)?),
            "snapshot_times" => overrides.snapshot_times = Some(parse_list(value, |s| parse_f64(line, key, s))?),
            "mode" => overrides.mode = Some(value.parse().map_err(|e: mfem_core::Error| ConfigError::at(line, e.to_string()))?),
            "max_halvings" => overrides.max_halvings = Some(parse_int(line, key, value)?),
            "record_every" => overrides.record_every = Some(parse_int(line, key, value)?),
            "out" => out = Some(base_dir.join(value)),
            "seed" => seed = parse_int(line, key, value)?,
            other => return Err(ConfigError::at(line, format!("unknown key `{other}`"))),
        }
    }
    let preset = preset.ok_or_else(|| ConfigError::new("missing `preset`"))?;
    let n_list = n_list.unwrap_or_else(|| preset.defaults.n_list.clone());
    let out = out.unwrap_or_else(|| base_dir.join("out"));
    Ok(ExperimentConfig { preset, n_list, overrides, out, seed })
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
    parse(&text, path.parent().unwrap_or(Path::new(".")))
}
