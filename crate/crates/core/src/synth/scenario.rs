use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::presets::{imu_noise_preset, ImuNoisePreset};
use crate::carrier::{ChannelId, SatId, SignalCode};
use crate::config::{parse_floats, parse_key_values, parse_position, parse_value, ConfigError};
use crate::geo::{enu_rotation, geodetic_to_ecef, EcefPosition, UnitVector3};
use crate::ingest::time::gps_seconds;

/// One sinusoidal component of the antenna displacement, in the local
/// east-north-up frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionComponent {
    pub axis: UnitVector3,
    /// Amplitude (m).
    pub amplitude: f64,
    /// Frequency (Hz).
    pub frequency: f64,
    /// Phase (rad).
    pub phase: f64,
}

/// A transmitter on a straight-line track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteTrack {
    pub channel: ChannelId,
    /// Position at the scenario start (m, ECEF).
    pub position: EcefPosition,
    /// Velocity (m/s, ECEF).
    pub velocity: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SatelliteSetup {
    /// Seeded geometry of `n` GPS L1 channels spread in azimuth and elevation.
    Auto(usize),
    Listed(Vec<SatelliteTrack>),
}

/// Whole cycles added to one channel from `epoch` onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlipInjection {
    pub channel: ChannelId,
    pub epoch: usize,
    pub cycles: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub duration_s: f64,
    pub gnss_rate: f64,
    pub imu_rate: f64,
    /// Start time (s since the GPS epoch).
    pub start_s: f64,
    pub receiver: EcefPosition,
    pub satellites: SatelliteSetup,
    pub motion: Vec<MotionComponent>,
    /// Receiver clock polynomial (cycles, cycles/s, cycles/s²).
    pub clock_drift: [f64; 3],
    /// Carrier phase noise (cycles).
    pub phase_noise_sigma: f64,
    pub imu_preset: ImuNoisePreset,
    /// Body attitude roll, pitch, yaw (degrees) relative to east-north-up.
    pub body_attitude: [f64; 3],
    pub magnetometer: bool,
    pub spoofer: Option<EcefPosition>,
    /// Attack interval relative to the start (s); the whole run when absent
    /// and a spoofer is set.
    pub attack_window: Option<(f64, f64)>,
    pub slip_injections: Vec<SlipInjection>,
}

/// Receiver used when the scenario names none: 69.27°N 15.96°E, 20 m.
pub fn default_receiver() -> EcefPosition {
    geodetic_to_ecef(69.27f64.to_radians(), 15.96f64.to_radians(), 20.0)
}

fn default_motion() -> Vec<MotionComponent> {
    let c = |axis: Vector3<f64>, amplitude, frequency, phase| MotionComponent {
        axis: UnitVector3::new_normalize(axis).expect("nonzero axis"),
        amplitude,
        frequency,
        phase,
    };
    vec![
        c(Vector3::x(), 0.05, 2.0, 0.0),
        c(Vector3::y(), 0.05, 2.0, std::f64::consts::FRAC_PI_2),
        c(Vector3::z(), 0.02, 3.0, 0.0),
    ]
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            duration_s: 300.0,
            gnss_rate: 20.0,
            imu_rate: 100.0,
            start_s: gps_seconds(2024, 9, 16, 0, 0, 0.0),
            receiver: default_receiver(),
            satellites: SatelliteSetup::Auto(10),
            motion: default_motion(),
            clock_drift: [0.0, 150.0, 0.0],
            phase_noise_sigma: 0.01,
            imu_preset: imu_noise_preset("LSM6DSV").expect("built-in preset"),
            body_attitude: [0.0; 3],
            magnetometer: true,
            spoofer: None,
            attack_window: None,
            slip_injections: Vec::new(),
        }
    }
}

/// Annotated scenario file with the default values.
pub const SCENARIO_TEMPLATE: &str = "\
# scenario length and rates
duration_s=300
gnss_rate=20
imu_rate=100
# receiver=x,y,z (m, ECEF) or receiver_llh=lat_deg,lon_deg,h_m
receiver_llh=69.27,15.96,20
# auto_sats=n, or sat.N=G05,1C,x,y,z,vx,vy,vz (start position and velocity, ECEF)
auto_sats=10
# motion.N=axis_e,axis_n,axis_u,amplitude_m,frequency_hz,phase_rad, or motion=none
motion.0=1,0,0,0.05,2.0,0.0
motion.1=0,1,0,0.05,2.0,1.5707963267948966
motion.2=0,0,1,0.02,3.0,0.0
# receiver clock polynomial c0,c1,c2 (cycles, cycles/s, cycles/s^2)
clock_drift=0,150,0
phase_noise=0.01
imu_preset=LSM6DSV
# roll,pitch,yaw in degrees
body_attitude=0,0,0
magnetometer=true
# spoofer=x,y,z (ECEF) or spoofer_enu=e,n,u (m from the receiver)
# attack=t0,t1 seconds from the start; without it a spoofer covers the whole run
# slip.N=G05,1C,epoch,cycles
";

fn split_index(key: &str) -> Option<(&str, usize)> {
    let (base, idx) = key.split_once('.')?;
    Some((base, idx.parse().ok()?))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(ConfigError::invalid_value(key, value, "expected true or false")),
    }
}

fn parse_channel(key: &str, value: &str, sat: &str, sig: &str) -> Result<ChannelId, ConfigError> {
    let sat: SatId = sat
        .trim()
        .parse()
        .map_err(|e: crate::carrier::ParseSatIdError| ConfigError::invalid_value(key, value, e.to_string()))?;
    let sig = sig.trim().as_bytes();
    if sig.len() != 2 {
        return Err(ConfigError::invalid_value(key, value, "signal code must be two characters"));
    }
    ChannelId::new(sat, SignalCode([sig[0], sig[1]]))
        .ok_or_else(|| ConfigError::invalid_value(key, value, "band has no fixed wavelength"))
}

fn split_fields<'a>(key: &str, value: &'a str, n: usize) -> Result<Vec<&'a str>, ConfigError> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != n {
        return Err(ConfigError::invalid_value(key, value, format!("expected {n} comma-separated fields")));
    }
    Ok(parts)
}

fn parse_satellite(key: &str, value: &str) -> Result<SatelliteTrack, ConfigError> {
    let parts = split_fields(key, value, 8)?;
    let channel = parse_channel(key, value, parts[0], parts[1])?;
    let nums = parse_floats(key, &parts[2..].join(","), 6)?;
    Ok(SatelliteTrack {
        channel,
        position: EcefPosition::new(nums[0], nums[1], nums[2]),
        velocity: Vector3::new(nums[3], nums[4], nums[5]),
    })
}

fn parse_motion(key: &str, value: &str) -> Result<MotionComponent, ConfigError> {
    let v = parse_floats(key, value, 6)?;
    let axis = UnitVector3::new_normalize(Vector3::new(v[0], v[1], v[2]))
        .ok_or_else(|| ConfigError::invalid_value(key, value, "zero motion axis"))?;
    Ok(MotionComponent {
        axis,
        amplitude: v[3],
        frequency: v[4],
        phase: v[5],
    })
}

fn parse_slip(key: &str, value: &str) -> Result<SlipInjection, ConfigError> {
    let parts = split_fields(key, value, 4)?;
    Ok(SlipInjection {
        channel: parse_channel(key, value, parts[0], parts[1])?,
        epoch: parse_value(key, parts[2])?,
        cycles: parse_floats(key, parts[3], 1)?[0],
    })
}

impl ScenarioConfig {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut motion = BTreeMap::new();
        let mut motion_none = false;
        let mut sats = BTreeMap::new();
        let mut auto_sats = None;
        let mut slips = BTreeMap::new();
        let mut receiver = None;
        let mut receiver_llh = None;
        let mut spoofer = None;
        let mut spoofer_enu = None;

        for (key, value) in parse_key_values(text)? {
            let (key, value) = (key.as_str(), value.as_str());
            if let Some((base, i)) = split_index(key) {
                match base {
                    "motion" => {
                        motion.insert(i, parse_motion(key, value)?);
                    }
                    "sat" => {
                        sats.insert(i, parse_satellite(key, value)?);
                    }
                    "slip" => {
                        slips.insert(i, parse_slip(key, value)?);
                    }
                    _ => return Err(ConfigError::UnknownKey(key.to_string())),
                }
                continue;
            }
            match key {
                "duration_s" => cfg.duration_s = parse_value(key, value)?,
                "gnss_rate" => cfg.gnss_rate = parse_value(key, value)?,
                "imu_rate" => cfg.imu_rate = parse_value(key, value)?,
                "start_s" => cfg.start_s = parse_value(key, value)?,
                "receiver" => receiver = Some(parse_position(key, value)?),
                "receiver_llh" => {
                    let v = parse_floats(key, value, 3)?;
                    receiver_llh = Some(geodetic_to_ecef(v[0].to_radians(), v[1].to_radians(), v[2]));
                }
                "auto_sats" => auto_sats = Some(parse_value::<usize>(key, value)?),
                "motion" if value == "none" => motion_none = true,
                "clock_drift" => {
                    let v = parse_floats(key, value, 3)?;
                    cfg.clock_drift = [v[0], v[1], v[2]];
                }
                "phase_noise" => cfg.phase_noise_sigma = parse_value(key, value)?,
                "imu_preset" => {
                    cfg.imu_preset = imu_noise_preset(value)
                        .map_err(|e| ConfigError::invalid_value(key, value, e.to_string()))?
                }
                "body_attitude" => {
                    let v = parse_floats(key, value, 3)?;
                    cfg.body_attitude = [v[0], v[1], v[2]];
                }
                "magnetometer" => cfg.magnetometer = parse_bool(key, value)?,
                "spoofer" => spoofer = Some(parse_position(key, value)?),
                "spoofer_enu" => spoofer_enu = Some(parse_floats(key, value, 3)?),
                "attack" => {
                    let v = parse_floats(key, value, 2)?;
                    cfg.attack_window = Some((v[0], v[1]));
                }
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            }
        }

        cfg.receiver = match (receiver, receiver_llh) {
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("give receiver or receiver_llh, not both".into())),
            (Some(r), None) | (None, Some(r)) => r,
            (None, None) => cfg.receiver,
        };
        if motion_none && !motion.is_empty() {
            return Err(ConfigError::Invalid("motion=none conflicts with motion.N entries".into()));
        }
        if motion_none {
            cfg.motion.clear();
        } else if !motion.is_empty() {
            cfg.motion = motion.into_values().collect();
        }
        cfg.satellites = match (auto_sats, sats.is_empty()) {
            (Some(_), false) => return Err(ConfigError::Invalid("give auto_sats or sat.N entries, not both".into())),
            (Some(n), true) => SatelliteSetup::Auto(n),
            (None, false) => SatelliteSetup::Listed(sats.into_values().collect()),
            (None, true) => cfg.satellites,
        };
        cfg.slip_injections = slips.into_values().collect();
        cfg.spoofer = match (spoofer, spoofer_enu) {
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("give spoofer or spoofer_enu, not both".into())),
            (Some(p), None) => Some(p),
            (None, Some(enu)) => {
                let ecef = enu_rotation(cfg.receiver).transpose() * Vector3::new(enu[0], enu[1], enu[2]);
                Some(EcefPosition::from_vector(cfg.receiver.to_vector() + ecef))
            }
            (None, None) => None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Number of carrier epochs: one at the start, then one per period up to the duration.
    pub fn gnss_epochs(&self) -> usize {
        (self.duration_s * self.gnss_rate + 1e-9).floor() as usize + 1
    }

    pub fn imu_samples(&self) -> usize {
        (self.duration_s * self.imu_rate + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad(format!("duration_s must be positive, got {}", self.duration_s));
        }
        if !(self.gnss_rate > 0.0 && self.gnss_rate <= 1000.0) {
            return bad(format!("gnss_rate {} outside (0, 1000] Hz", self.gnss_rate));
        }
        if !(self.imu_rate >= 50.0 && self.imu_rate <= 10_000.0) {
            return bad(format!("imu_rate {} outside [50, 10000] Hz", self.imu_rate));
        }
        if !self.start_s.is_finite() || self.start_s.abs() > 1e10 {
            return bad(format!("start_s {} out of range", self.start_s));
        }
        if self.gnss_epochs() < 2 {
            return bad("scenario shorter than two carrier epochs".into());
        }
        if !self.receiver.is_finite() || self.receiver.norm() < 1.0 {
            return bad("receiver position degenerate".into());
        }
        let nyquist = self.gnss_rate / 2.0;
        for m in &self.motion {
            if !(m.amplitude >= 0.0 && m.amplitude.is_finite()) {
                return bad(format!("motion amplitude {} must be non-negative", m.amplitude));
            }
            if !(m.frequency > 0.0 && m.frequency < nyquist) {
                return bad(format!("motion frequency {} outside (0, {nyquist}) Hz", m.frequency));
            }
            if !m.phase.is_finite() {
                return bad("motion phase not finite".into());
            }
        }
        match &self.satellites {
            SatelliteSetup::Auto(n) if !(1..=32).contains(n) => {
                return bad(format!("auto_sats {n} outside [1, 32]"));
            }
            SatelliteSetup::Listed(list) => {
                let mut seen = std::collections::BTreeSet::new();
                for s in list {
                    if !seen.insert(s.channel) {
                        return bad(format!("duplicate channel {}", s.channel));
                    }
                    if !s.position.is_finite() || !s.velocity.iter().all(|v| v.is_finite()) {
                        return bad(format!("channel {} track not finite", s.channel));
                    }
                    if (s.position.to_vector() - self.receiver.to_vector()).norm() < 1.0 {
                        return bad(format!("channel {} coincides with the receiver", s.channel));
                    }
                }
            }
            _ => {}
        }
        if !self.clock_drift.iter().all(|c| c.is_finite()) {
            return bad("clock_drift not finite".into());
        }
        if !(self.phase_noise_sigma >= 0.0 && self.phase_noise_sigma.is_finite()) {
            return bad(format!("phase_noise {} must be non-negative", self.phase_noise_sigma));
        }
        if !self.body_attitude.iter().all(|c| c.is_finite()) {
            return bad("body_attitude not finite".into());
        }
        if let Some(s) = self.spoofer {
            if !s.is_finite() || (s.to_vector() - self.receiver.to_vector()).norm() < 1.0 {
                return bad("spoofer position degenerate".into());
            }
        }
        if let Some((t0, t1)) = self.attack_window {
            if self.spoofer.is_none() {
                return bad("attack window given without a spoofer".into());
            }
            if !(t0 >= 0.0 && t0 < t1 && t1 <= self.duration_s) {
                return bad(format!("attack window [{t0}, {t1}] not within [0, {}]", self.duration_s));
            }
        }
        let epochs = self.gnss_epochs();
        for s in &self.slip_injections {
            if s.epoch == 0 || s.epoch >= epochs {
                return bad(format!("slip epoch {} outside [1, {})", s.epoch, epochs));
            }
            if !s.cycles.is_finite() {
                return bad("slip cycles not finite".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn template_parses_to_default() {
        let cfg = ScenarioConfig::from_text(SCENARIO_TEMPLATE).unwrap();
        let d = ScenarioConfig::default();
        assert_eq!(cfg.motion, d.motion);
        assert_eq!(cfg.satellites, d.satellites);
        assert_eq!(cfg.clock_drift, d.clock_drift);
        assert!((cfg.receiver.to_vector() - d.receiver.to_vector()).norm() < 1e-6);
        assert_eq!(cfg.gnss_epochs(), 6001);
        assert_eq!(cfg.imu_samples(), 30001);
    }

    #[test]
    fn attack_outside_duration() {
        let err = ScenarioConfig::from_text("duration_s=60\nspoofer_enu=500,0,10\nattack=30,90\n").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn attack_needs_spoofer() {
        assert!(ScenarioConfig::from_text("attack=10,20\n").is_err());
    }

    #[test]
    fn motion_above_nyquist() {
        assert!(ScenarioConfig::from_text("motion.0=1,0,0,0.05,10,0\n").is_err());
    }

    #[test]
    fn explicit_lists() {
        let text = "sat.0=G05,1C,2e7,1e7,1e7,0,3900,0\nsat.1=E11,5Q,1e7,2e7,1e7,0,0,3900\n\
                    motion=none\nslip.0=G05,1C,40,3\nspoofer=1,2,3\n";
        let cfg = ScenarioConfig::from_text(text).unwrap();
        match &cfg.satellites {
            SatelliteSetup::Listed(l) => {
                assert_eq!(l.len(), 2);
                assert_eq!(l[1].channel.to_string(), "E11 L5Q");
            }
            other => panic!("{other:?}"),
        }
        assert!(cfg.motion.is_empty());
        assert_eq!(cfg.slip_injections[0].epoch, 40);
        assert_eq!(cfg.spoofer, Some(EcefPosition::new(1.0, 2.0, 3.0)));
    }

    #[test]
    fn spoofer_enu_is_relative_to_receiver() {
        let cfg = ScenarioConfig::from_text("receiver_llh=0,0,0\nspoofer_enu=0,0,100\n").unwrap();
        let s = cfg.spoofer.unwrap();
        assert!((s.x - (crate::geo::WGS84_A + 100.0)).abs() < 1e-6);
    }

    #[test]
    fn unknown_key_and_preset() {
        assert!(matches!(ScenarioConfig::from_text("foo=1\n"), Err(ConfigError::UnknownKey(_))));
        assert!(ScenarioConfig::from_text("imu_preset=BMI270\n").is_err());
    }
}
