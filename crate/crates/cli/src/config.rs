//! `key = value` run configuration.
//!
//! ```text
//! # beam
//! rho = 1
//! alpha1 = 1
//! beta = 1
//! gamma = 0.7071067811865476
//! mu = 1
//! length = 1
//! thickness = 1
//! cells = 1024        # optional
//! ```

use std::collections::HashMap;

use piezo_core::beam::{BeamParameters, DEFAULT_QMAX, DEFAULT_TOL};
use piezo_core::timedomain::{DEFAULT_CFL, MIN_CELLS};
use thiserror::Error;

pub const REQUIRED_KEYS: [&str; 7] = ["rho", "alpha1", "beta", "gamma", "mu", "length", "thickness"];
pub const OPTIONAL_KEYS: [&str; 9] = [
    "modes",
    "cells",
    "final_time",
    "gain",
    "cfl",
    "qmax",
    "tol",
    "seed",
    "sample_dt",
];

pub const DEFAULT_MODES: usize = 64;
pub const DEFAULT_CELLS: usize = 2048;
pub const DEFAULT_FINAL_TIME: f64 = 20.0;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("line {line}: key `{key}` already set on line {first}")]
    DuplicateKey { key: String, line: usize, first: usize },
    #[error("line {line}: cannot parse `{value}` for key `{key}`")]
    MalformedValue { key: String, value: String, line: usize },
    #[error("line {line}: `{key}` must be strictly positive, got {value}")]
    NonPositiveParameter { key: String, value: String, line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    MalformedLine { text: String, line: usize },
    #[error("line {line}: {message}")]
    OutOfRange { key: String, message: String, line: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: BeamParameters,
    /// Modal truncation order `J`.
    pub modes: usize,
    /// Spatial cells `N`.
    pub cells: usize,
    pub final_time: f64,
    /// Feedback gain; `None` means `1/(2 h)`.
    pub gain: Option<f64>,
    pub cfl: f64,
    pub qmax: u64,
    pub tol: f64,
    pub seed: u64,
    /// Output cadence of simulations; `None` picks about 1000 samples.
    pub sample_dt: Option<f64>,
}

impl RunConfig {
    pub fn new(params: BeamParameters) -> Self {
        Self {
            params,
            modes: DEFAULT_MODES,
            cells: DEFAULT_CELLS,
            final_time: DEFAULT_FINAL_TIME,
            gain: None,
            cfl: DEFAULT_CFL,
            qmax: DEFAULT_QMAX,
            tol: DEFAULT_TOL,
            seed: DEFAULT_SEED,
            sample_dt: None,
        }
    }

    /// Gain used for closed-loop runs with `params`.
    pub fn gain_for(&self, params: &BeamParameters) -> f64 {
        self.gain.unwrap_or(0.5 / params.thickness)
    }

    pub fn sample_dt_for(&self, final_time: f64) -> f64 {
        self.sample_dt.unwrap_or(final_time / 1000.0)
    }
}

struct Entry {
    value: String,
    line: usize,
}

fn parse_f64(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    e.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::MalformedValue {
            key: key.to_string(),
            value: e.value.clone(),
            line: e.line,
        })
}

fn parse_positive(key: &str, e: &Entry) -> Result<f64, ConfigError> {
    let v = parse_f64(key, e)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::NonPositiveParameter {
            key: key.to_string(),
            value: e.value.clone(),
            line: e.line,
        })
    }
}

fn parse_int<T: std::str::FromStr>(key: &str, e: &Entry) -> Result<T, ConfigError> {
    e.value.parse::<T>().map_err(|_| ConfigError::MalformedValue {
        key: key.to_string(),
        value: e.value.clone(),
        line: e.line,
    })
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut entries: HashMap<String, Entry> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(ConfigError::MalformedLine {
                text: body.to_string(),
                line,
            });
        };
        let key = k.trim().to_string();
        let value = v.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError::MalformedLine {
                text: body.to_string(),
                line,
            });
        }
        if !REQUIRED_KEYS.contains(&key.as_str()) && !OPTIONAL_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key, line });
        }
        if let Some(prev) = entries.get(&key) {
            return Err(ConfigError::DuplicateKey {
                key,
                line,
                first: prev.line,
            });
        }
        entries.insert(key, Entry { value, line });
    }

    let mut values = [0.0; 7];
    for (slot, key) in values.iter_mut().zip(REQUIRED_KEYS) {
        let e = entries.get(key).ok_or_else(|| ConfigError::MissingKey { key: key.to_string() })?;
        *slot = parse_positive(key, e)?;
    }
    let [rho, alpha1, beta, gamma, mu, length, thickness] = values;
    let params = BeamParameters {
        rho,
        alpha1,
        beta,
        gamma,
        mu,
        length,
        thickness,
    };
    let mut cfg = RunConfig::new(params);

    let range = |key: &str, e: &Entry, message: String| ConfigError::OutOfRange {
        key: key.to_string(),
        message,
        line: e.line,
    };
    if let Some(e) = entries.get("modes") {
        cfg.modes = parse_int("modes", e)?;
        if cfg.modes < 1 {
            return Err(range("modes", e, "modes must be at least 1".into()));
        }
    }
    if let Some(e) = entries.get("cells") {
        cfg.cells = parse_int("cells", e)?;
        if cfg.cells < MIN_CELLS {
            return Err(range("cells", e, format!("cells must be at least {MIN_CELLS}")));
        }
    }
    if let Some(e) = entries.get("final_time") {
        cfg.final_time = parse_positive("final_time", e)?;
    }
    if let Some(e) = entries.get("gain") {
        cfg.gain = Some(parse_positive("gain", e)?);
    }
    if let Some(e) = entries.get("cfl") {
        cfg.cfl = parse_positive("cfl", e)?;
        if cfg.cfl >= 1.0 {
            return Err(range("cfl", e, "cfl must lie in (0, 1)".into()));
        }
    }
    if let Some(e) = entries.get("qmax") {
        cfg.qmax = parse_int("qmax", e)?;
        if cfg.qmax < 1 {
            return Err(range("qmax", e, "qmax must be at least 1".into()));
        }
    }
    if let Some(e) = entries.get("tol") {
        cfg.tol = parse_positive("tol", e)?;
    }
    if let Some(e) = entries.get("seed") {
        cfg.seed = parse_int("seed", e)?;
    }
    if let Some(e) = entries.get("sample_dt") {
        cfg.sample_dt = Some(parse_positive("sample_dt", e)?);
    }
    Ok(cfg)
}

/// Renders `cfg` back into the file format.
pub fn render_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    for (k, v) in cfg.params.named() {
        out.push_str(&format!("{k} = {v:?}\n"));
    }
    out.push_str(&format!("modes = {}\n", cfg.modes));
    out.push_str(&format!("cells = {}\n", cfg.cells));
    out.push_str(&format!("final_time = {:?}\n", cfg.final_time));
    if let Some(g) = cfg.gain {
        out.push_str(&format!("gain = {g:?}\n"));
    }
    out.push_str(&format!("cfl = {:?}\n", cfg.cfl));
    out.push_str(&format!("qmax = {}\n", cfg.qmax));
    out.push_str(&format!("tol = {:?}\n", cfg.tol));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    if let Some(s) = cfg.sample_dt {
        out.push_str(&format!("sample_dt = {s:?}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: &str = "rho = 1\nalpha1 = 1\nbeta = 1\ngamma = 1\nmu = 1\nlength = 1\nthickness = 1\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_config(UNIT).unwrap();
        assert_eq!(cfg.params, BeamParameters::unit());
        assert_eq!(cfg.modes, 64);
        assert_eq!(cfg.cells, 2048);
        assert_eq!(cfg.cfl, 0.9);
        assert_eq!(cfg.qmax, 10_000);
        assert_eq!(cfg.tol, 1e-9);
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.gain_for(&cfg.params), 0.5);
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{UNIT}cells = 128 # coarse\n");
        assert_eq!(parse_config(&text).unwrap().cells, 128);
    }

    #[test]
    fn missing_key() {
        let text = UNIT.replace("mu = 1\n", "");
        assert_eq!(
            parse_config(&text),
            Err(ConfigError::MissingKey { key: "mu".into() })
        );
    }

    #[test]
    fn zero_coupling_rejected() {
        let text = UNIT.replace("gamma = 1", "gamma = 0");
        match parse_config(&text) {
            Err(ConfigError::NonPositiveParameter { key, line, .. }) => {
                assert_eq!(key, "gamma");
                assert_eq!(line, 4);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_unknown_malformed() {
        let text = format!("{UNIT}rho = 2\n");
        assert!(matches!(
            parse_config(&text),
            Err(ConfigError::DuplicateKey { line: 8, first: 1, .. })
        ));
        let text = format!("{UNIT}colour = red\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::UnknownKey { line: 8, .. })));
        let text = UNIT.replace("beta = 1", "beta = one");
        assert!(matches!(parse_config(&text), Err(ConfigError::MalformedValue { line: 3, .. })));
        let text = format!("{UNIT}just words\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::MalformedLine { line: 8, .. })));
        let text = format!("{UNIT}cfl = 1.5\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::OutOfRange { line: 8, .. })));
        let text = format!("{UNIT}cells = 4\n");
        assert!(matches!(parse_config(&text), Err(ConfigError::OutOfRange { .. })));
    }

    #[test]
    fn render_round_trip() {
        let mut cfg = parse_config(UNIT).unwrap();
        cfg.params.gamma = 0.5f64.sqrt();
        cfg.gain = Some(0.25);
        cfg.sample_dt = Some(0.01);
        assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);
    }
}
