use thiserror::Error;

/// Datasheet noise figures of an inertial sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImuNoisePreset {
    pub name: &'static str,
    /// Accelerometer bias (mg).
    pub accel_bias_mg: f64,
    /// Accelerometer noise density (µg/√Hz).
    pub accel_noise_ug: f64,
    /// Gyroscope bias drift (°/h).
    pub gyro_drift_deg_h: f64,
    /// Gyroscope noise density (m°/s/√Hz).
    pub gyro_noise_mdeg_s: f64,
    /// Magnetometer noise (mG); `None` when the sensor has no magnetometer.
    pub mag_noise_mg: Option<f64>,
    /// Accelerometer full scale (g).
    pub accel_range_g: f64,
}

/// Magnetometer noise (mG) of the companion magnetometer used with sensors
/// that carry none.
pub const COMPANION_MAG_NOISE_MG: f64 = 3.0;

impl ImuNoisePreset {
    /// Magnetometer noise, falling back to the companion magnetometer.
    pub fn effective_mag_noise_mg(&self) -> f64 {
        self.mag_noise_mg.unwrap_or(COMPANION_MAG_NOISE_MG)
    }
}

pub const PRESETS: [ImuNoisePreset; 4] = [
    ImuNoisePreset {
        name: "MTI-3-5A",
        accel_bias_mg: 0.03,
        accel_noise_ug: 120.0,
        gyro_drift_deg_h: 10.0,
        gyro_noise_mdeg_s: 7.0,
        mag_noise_mg: Some(0.5),
        accel_range_g: 16.0,
    },
    ImuNoisePreset {
        name: "SCHA63T",
        accel_bias_mg: 13.5,
        accel_noise_ug: 59.6,
        gyro_drift_deg_h: 1.64,
        gyro_noise_mdeg_s: 15.0,
        mag_noise_mg: None,
        accel_range_g: 6.0,
    },
    ImuNoisePreset {
        name: "LSM6DSV",
        accel_bias_mg: 12.0,
        accel_noise_ug: 60.0,
        gyro_drift_deg_h: 3600.0,
        gyro_noise_mdeg_s: 2.8,
        mag_noise_mg: Some(3.0),
        accel_range_g: 16.0,
    },
    ImuNoisePreset {
        name: "LSM6DSR",
        accel_bias_mg: 10.0,
        accel_noise_ug: 60.0,
        gyro_drift_deg_h: 3600.0,
        gyro_noise_mdeg_s: 5.0,
        mag_noise_mg: Some(3.0),
        accel_range_g: 16.0,
    },
];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown IMU preset {0:?}")]
pub struct UnknownPreset(pub String);

pub fn imu_noise_preset(name: &str) -> Result<ImuNoisePreset, UnknownPreset> {
    PRESETS
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name.trim()))
        .copied()
        .ok_or_else(|| UnknownPreset(name.to_string()))
}
