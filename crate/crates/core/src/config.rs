//! Flat `key=value` configuration files and the detection run settings.

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

use crate::geo::EcefPosition;
use crate::imu::{DEFAULT_CUTOFF_HZ, DEFAULT_GAIN, DEFAULT_INIT_WINDOW};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected key=value, found {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
}

impl ConfigError {
    pub fn invalid_value(key: &str, value: &str, reason: impl Into<String>) -> Self {
        Self::InvalidValue {
            key: key.to_string(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}

/// Ordered `key → value` pairs of a flat configuration file.
///
/// Blank lines and lines starting with `#` are ignored; whitespace around
/// keys and values is trimmed.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            });
        }
        if out.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(ConfigError::DuplicateKey {
                line: i + 1,
                key: key.to_string(),
            });
        }
    }
    Ok(out)
}

pub(crate) fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| ConfigError::invalid_value(key, value, e.to_string()))
}

/// Comma-separated floats, exactly `n` of them.
pub(crate) fn parse_floats(key: &str, value: &str, n: usize) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<f64> = value
        .split(',')
        .map(|p| parse_value::<f64>(key, p.trim()))
        .collect::<Result<_, _>>()?;
    if parts.len() != n {
        return Err(ConfigError::invalid_value(
            key,
            value,
            format!("expected {n} comma-separated numbers"),
        ));
    }
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(ConfigError::invalid_value(key, value, "non-finite number"));
    }
    Ok(parts)
}

pub(crate) fn parse_position(key: &str, value: &str) -> Result<EcefPosition, ConfigError> {
    let v = parse_floats(key, value, 3)?;
    Ok(EcefPosition::new(v[0], v[1], v[2]))
}

/// Settings of one detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Window length N in carrier epochs; each window holds N+1 epochs.
    pub window_len: usize,
    /// Epochs between consecutive window ends.
    pub stride: usize,
    /// Gate on the peak L1 linear acceleration (m/s²).
    pub acc_threshold: f64,
    /// High-pass cutoff of the displacement chain (Hz).
    pub hp_cutoff: f64,
    pub min_channels: usize,
    /// Elevation mask (degrees).
    pub elevation_mask: f64,
    /// Floor on the per-channel noise scale (cycles).
    pub sigma_floor: f64,
    /// Added to IMU timestamps before alignment (s).
    pub imu_time_offset: f64,
    /// Leading carrier epochs excluded from detection.
    pub burn_in: usize,
    /// Cycle-slip detection threshold (cycles).
    pub slip_threshold: f64,
    /// Receiver position; when absent the observation header is used.
    pub receiver: Option<EcefPosition>,
    pub attitude_gain: f64,
    /// Attitude filter convergence period (s).
    pub attitude_init: f64,
    pub optimizer_tol: f64,
    pub optimizer_max_iter: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            window_len: 20,
            stride: 10,
            acc_threshold: 0.5,
            hp_cutoff: DEFAULT_CUTOFF_HZ,
            min_channels: 4,
            elevation_mask: 10.0,
            sigma_floor: crate::carrier::DEFAULT_SIGMA_FLOOR,
            imu_time_offset: 0.0,
            burn_in: 0,
            slip_threshold: crate::carrier::DEFAULT_SLIP_THRESHOLD,
            receiver: None,
            attitude_gain: DEFAULT_GAIN,
            attitude_init: DEFAULT_INIT_WINDOW,
            optimizer_tol: 1e-10,
            optimizer_max_iter: 100,
        }
    }
}

impl RunConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (k, v) in parse_key_values(text)? {
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key; used for file entries and command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "window_len" => self.window_len = parse_value(key, value)?,
            "stride" => self.stride = parse_value(key, value)?,
            "acc_threshold" => self.acc_threshold = parse_value(key, value)?,
            "hp_cutoff" => self.hp_cutoff = parse_value(key, value)?,
            "min_channels" => self.min_channels = parse_value(key, value)?,
            "elevation_mask" => self.elevation_mask = parse_value(key, value)?,
            "sigma_floor" => self.sigma_floor = parse_value(key, value)?,
            "imu_time_offset" => self.imu_time_offset = parse_value(key, value)?,
            "burn_in" => self.burn_in = parse_value(key, value)?,
            "slip_threshold" => self.slip_threshold = parse_value(key, value)?,
            "receiver" => self.receiver = Some(parse_position(key, value)?),
            "attitude_gain" => self.attitude_gain = parse_value(key, value)?,
            "attitude_init" => self.attitude_init = parse_value(key, value)?,
            "optimizer_tol" => self.optimizer_tol = parse_value(key, value)?,
            "optimizer_max_iter" => self.optimizer_max_iter = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("acc_threshold", self.acc_threshold),
            ("hp_cutoff", self.hp_cutoff),
            ("sigma_floor", self.sigma_floor),
            ("slip_threshold", self.slip_threshold),
            ("attitude_gain", self.attitude_gain),
            ("optimizer_tol", self.optimizer_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.window_len < 8 {
            return Err(ConfigError::Invalid(format!(
                "window_len must be at least 8, got {}",
                self.window_len
            )));
        }
        if self.stride == 0 {
            return Err(ConfigError::Invalid("stride must be at least 1".into()));
        }
        if self.min_channels < 2 {
            return Err(ConfigError::Invalid("min_channels must be at least 2".into()));
        }
        if self.optimizer_max_iter == 0 {
            return Err(ConfigError::Invalid("optimizer_max_iter must be at least 1".into()));
        }
        if !(-90.0..90.0).contains(&self.elevation_mask) {
            return Err(ConfigError::Invalid(format!(
                "elevation_mask {} outside [-90, 90) degrees",
                self.elevation_mask
            )));
        }
        if !self.imu_time_offset.is_finite() || !(self.attitude_init >= 0.0) {
            return Err(ConfigError::Invalid("non-finite time setting".into()));
        }
        if let Some(r) = self.receiver {
            if !r.is_finite() || r.norm() < 1.0 {
                return Err(ConfigError::Invalid("receiver position degenerate".into()));
            }
        }
        Ok(())
    }
}
