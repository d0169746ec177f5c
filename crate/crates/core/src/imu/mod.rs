//! Inertial processing: attitude, gravity removal, zero-phase high-pass
//! double integration of the antenna displacement, motion summaries, the
//! acceleration gate and Allan-deviation characterization.

mod allan;
mod attitude;
mod filter;
mod motion;

pub use allan::{allan_deviation, decade_taus};
pub use attitude::{estimate_attitude, linear_acceleration, Attitude, DEFAULT_GAIN, DEFAULT_INIT_WINDOW};
pub use filter::{high_pass, integrate_displacement, Biquad};
pub use motion::{acceleration_gate, max_l1_norm, motion_direction_amplitude, MotionSummary};

use nalgebra::Vector3;
use thiserror::Error;

/// Standard gravity (m/s²).
pub const STANDARD_GRAVITY: f64 = 9.806_65;

/// Largest specific force accepted from a sample (±16 g full scale).
pub const MAX_SPECIFIC_FORCE: f64 = 16.0 * STANDARD_GRAVITY;

/// Default high-pass cutoff (Hz).
pub const DEFAULT_CUTOFF_HZ: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImuError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("parameter error: {0}")]
    ParameterError(String),
    #[error("attitude and sample timestamps differ at index {0}")]
    AlignmentError(usize),
    #[error("sample spacing not uniform within 1% (index {0})")]
    NonUniformRate(usize),
    #[error("no motion: displacement energy {0:.3e} m² below threshold")]
    NoMotion(f64),
}

/// One strapdown IMU sample in the body frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    /// Specific force (m/s²).
    pub specific_force: Vector3<f64>,
    /// Angular rate (rad/s).
    pub angular_rate: Vector3<f64>,
    /// Magnetic field (µT).
    pub magnetic: Option<Vector3<f64>>,
}

/// High-pass antenna displacement sampled at the IMU rate, in the local
/// level frame of the attitude filter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisplacementSeries {
    pub t: Vec<f64>,
    /// Displacement (m).
    pub b: Vec<Vector3<f64>>,
    /// Velocity (m/s).
    pub v: Vec<Vector3<f64>>,
    /// High-pass linear acceleration (m/s²).
    pub a_lin: Vec<Vector3<f64>>,
}

impl DisplacementSeries {
    /// Series carrying only displacement; velocity and acceleration zero.
    pub fn from_displacement(t: Vec<f64>, b: Vec<Vector3<f64>>) -> Self {
        let n = b.len();
        Self {
            t,
            b,
            v: vec![Vector3::zeros(); n],
            a_lin: vec![Vector3::zeros(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Linear interpolation of the displacement at `t`; `None` outside the span.
    pub fn interpolate(&self, t: f64) -> Option<Vector3<f64>> {
        let n = self.t.len();
        if n == 0 || !(t >= self.t[0] && t <= self.t[n - 1]) {
            return None;
        }
        let hi = self.t.partition_point(|&x| x < t);
        if self.t[hi] == t || hi == 0 {
            return Some(self.b[hi]);
        }
        let (t0, t1) = (self.t[hi - 1], self.t[hi]);
        let w = (t - t0) / (t1 - t0);
        Some(self.b[hi - 1] + (self.b[hi] - self.b[hi - 1]) * w)
    }

    /// Index range of samples with `t0 <= t <= t1`.
    pub fn index_range(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let lo = self.t.partition_point(|&x| x < t0);
        let hi = self.t.partition_point(|&x| x <= t1);
        lo..hi.max(lo)
    }
}

/// Mean sample rate of a timestamp series, checking uniformity within 1%.
pub(crate) fn uniform_rate(t: &[f64]) -> Result<f64, ImuError> {
    if t.len() < 2 {
        return Err(ImuError::InsufficientData("fewer than two samples".into()));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(ImuError::NonUniformRate(1));
    }
    for (i, w) in t.windows(2).enumerate() {
        let d = w[1] - w[0];
        if (d - dt).abs() > 0.01 * dt {
            return Err(ImuError::NonUniformRate(i + 1));
        }
    }
    Ok(1.0 / dt)
}
