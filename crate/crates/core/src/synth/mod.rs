//! Forward simulation of coupled carrier-phase and IMU recordings for
//! benign, spoofed and transition scenarios.

mod presets;
mod scenario;

pub use presets::{imu_noise_preset, ImuNoisePreset, UnknownPreset, COMPANION_MAG_NOISE_MG, PRESETS};
pub use scenario::{
    default_receiver, MotionComponent, SatelliteSetup, SatelliteTrack, ScenarioConfig, SlipInjection,
    SCENARIO_TEMPLATE,
};

use std::fmt;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::carrier::{ChannelId, ChannelObservation, Constellation, ObservationEpoch, SatId, SignalCode};
use crate::config::ConfigError;
use crate::geo::{enu_rotation, EcefPosition, SatPositionTable};
use crate::imu::{ImuSample, STANDARD_GRAVITY};

/// Orbit radius used for generated satellites (m).
const ORBIT_RADIUS_M: f64 = 2.656e7;
/// Orbital speed used for generated satellites (m/s).
const ORBIT_SPEED_M_S: f64 = 3874.0;
/// Spacing of the satellite position table (s).
const SAT_TABLE_STEP_S: f64 = 10.0;
/// Local magnetic field, east-north-up (µT).
const MAGNETIC_FIELD_ENU_UT: [f64; 3] = [0.0, 15.0, -45.0];
/// Reported carrier-to-noise density (dB-Hz).
const NOMINAL_CN0: f64 = 45.0;

const STREAM_SCENARIO: u64 = 0;
const STREAM_IMU: u64 = 1;
const STREAM_FIRST_CHANNEL: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthLabel {
    Benign,
    Spoofed,
}

impl TruthLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            TruthLabel::Benign => "benign",
            TruthLabel::Spoofed => "spoofed",
        }
    }
}

impl fmt::Display for TruthLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub observations: Vec<ObservationEpoch>,
    pub imu: Vec<ImuSample>,
    pub sats: SatPositionTable,
    /// Label of every carrier epoch.
    pub truth: Vec<(f64, TruthLabel)>,
    pub receiver: EcefPosition,
    pub tracks: Vec<SatelliteTrack>,
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Seeded satellites spread in azimuth, with elevations between 15° and 81°.
fn auto_tracks(n: usize, receiver: EcefPosition, rng: &mut ChaCha8Rng) -> Vec<SatelliteTrack> {
    let to_ecef = enu_rotation(receiver).transpose();
    let p = receiver.to_vector();
    let az0: f64 = rng.random_range(0.0..360.0);
    (0..n)
        .map(|i| {
            let az = (az0 + 360.0 * i as f64 / n as f64 + rng.random_range(-8.0..8.0)).to_radians();
            let golden = (i as f64 * 0.618_033_988_749_895).fract();
            let el = (18.0 + 60.0 * golden + rng.random_range(-3.0..3.0)).to_radians();
            let u = to_ecef * Vector3::new(el.cos() * az.sin(), el.cos() * az.cos(), el.sin());
            // distance along u to the orbit sphere
            let pu = p.dot(&u);
            let d = -pu + (pu * pu - p.norm_squared() + ORBIT_RADIUS_M * ORBIT_RADIUS_M).sqrt();
            let pos = p + u * d;
            let e1 = pos.cross(&Vector3::z()).normalize();
            let e2 = pos.cross(&e1).normalize();
            let psi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let velocity = (e1 * psi.cos() + e2 * psi.sin()) * ORBIT_SPEED_M_S;
            let prn = u8::try_from(i + 1).expect("at most 32 satellites");
            SatelliteTrack {
                channel: ChannelId::new(SatId::new(Constellation::Gps, prn), SignalCode(*b"1C"))
                    .expect("GPS L1 has a wavelength"),
                position: EcefPosition::from_vector(pos),
                velocity,
            }
        })
        .collect()
}

/// Antenna displacement and its second derivative at `tau` seconds after the start.
fn motion_at(cfg: &ScenarioConfig, tau: f64) -> (Vector3<f64>, Vector3<f64>) {
    let mut b = Vector3::zeros();
    let mut acc = Vector3::zeros();
    for m in &cfg.motion {
        let w = std::f64::consts::TAU * m.frequency;
        let s = (w * tau + m.phase).sin();
        b += m.axis.as_vector() * (m.amplitude * s);
        acc -= m.axis.as_vector() * (m.amplitude * w * w * s);
    }
    (b, acc)
}

fn spoofed_at(cfg: &ScenarioConfig, tau: f64) -> bool {
    match (cfg.spoofer, cfg.attack_window) {
        (None, _) => false,
        (Some(_), None) => true,
        (Some(_), Some((t0, t1))) => tau >= t0 && tau < t1,
    }
}

fn position_at(track: &SatelliteTrack, tau: f64) -> Vector3<f64> {
    track.position.to_vector() + track.velocity * tau
}

fn channel_phases(
    cfg: &ScenarioConfig,
    track: &SatelliteTrack,
    ambiguity: f64,
    to_ecef: &Matrix3<f64>,
    to_enu: &Matrix3<f64>,
    spoofer_los: Option<Vector3<f64>>,
    rng: &mut ChaCha8Rng,
) -> Vec<Option<f64>> {
    let lambda = track.channel.wavelength();
    let receiver = cfg.receiver.to_vector();
    let [c0, c1, c2] = cfg.clock_drift;
    let mut slip = 0.0;
    (0..cfg.gnss_epochs())
        .map(|k| {
            let tau = k as f64 / cfg.gnss_rate;
            for s in &cfg.slip_injections {
                if s.channel == track.channel && s.epoch == k {
                    slip += s.cycles;
                }
            }
            let noise = cfg.phase_noise_sigma * normal(rng);
            let r = position_at(track, tau) - receiver;
            let range = r.norm();
            let los = r / range;
            if (to_enu * los).z < 0.0 {
                return None;
            }
            let b = to_ecef * motion_at(cfg, tau).0;
            let projection = match spoofer_los {
                Some(sp) if spoofed_at(cfg, tau) => sp.dot(&b),
                _ => los.dot(&b),
            };
            let clock = c0 + c1 * tau + c2 * tau * tau;
            Some(range / lambda + projection / lambda + clock + ambiguity + slip + noise)
        })
        .collect()
}

fn imu_stream(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng, biases: &(Vector3<f64>, Vector3<f64>)) -> Vec<ImuSample> {
    let p = &cfg.imu_preset;
    let [roll, pitch, yaw] = cfg.body_attitude.map(f64::to_radians);
    let to_body = UnitQuaternion::from_euler_angles(roll, pitch, yaw).inverse();
    let sqrt_rate = cfg.imu_rate.sqrt();
    let accel_sigma = p.accel_noise_ug * 1e-6 * STANDARD_GRAVITY * sqrt_rate;
    let gyro_sigma = (p.gyro_noise_mdeg_s * 1e-3).to_radians() * sqrt_rate;
    // 1 mG = 0.1 µT
    let mag_sigma = p.effective_mag_noise_mg() * 0.1;
    let full_scale = p.accel_range_g * STANDARD_GRAVITY;
    let field = to_body * Vector3::from(MAGNETIC_FIELD_ENU_UT);
    let (accel_bias, gyro_bias) = biases;
    let draw3 = |rng: &mut ChaCha8Rng, sigma: f64| Vector3::new(normal(rng), normal(rng), normal(rng)) * sigma;
    (0..cfg.imu_samples())
        .map(|k| {
            let tau = k as f64 / cfg.imu_rate;
            let (_, acc) = motion_at(cfg, tau);
            let f = to_body * (acc + Vector3::new(0.0, 0.0, STANDARD_GRAVITY)) + accel_bias + draw3(rng, accel_sigma);
            let specific_force = f.map(|v| v.clamp(-full_scale, full_scale));
            let angular_rate = gyro_bias + draw3(rng, gyro_sigma);
            let noise = draw3(rng, mag_sigma);
            ImuSample {
                t: cfg.start_s + tau,
                specific_force,
                angular_rate,
                magnetic: cfg.magnetometer.then(|| field + noise),
            }
        })
        .collect()
}

/// Simulates a recording of `cfg`; identical `(cfg, seed)` give identical output.
///
/// Random draws come from independent ChaCha8 streams of `seed`: one for
/// the scenario constants (geometry, ambiguities, sensor biases), one for
/// the IMU noise and one per channel for the phase noise.
pub fn generate_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<SyntheticScenario, ConfigError> {
    cfg.validate()?;
    let mut rng = rng_stream(seed, STREAM_SCENARIO);
    let tracks = match &cfg.satellites {
        SatelliteSetup::Auto(n) => auto_tracks(*n, cfg.receiver, &mut rng),
        SatelliteSetup::Listed(list) => list.clone(),
    };
    let ambiguities: Vec<f64> = tracks
        .iter()
        .map(|_| rng.random_range(-100_000i64..=100_000) as f64)
        .collect();
    let p = &cfg.imu_preset;
    let accel_bias = Vector3::from_fn(|_, _| sign(&mut rng)) * (p.accel_bias_mg * 1e-3 * STANDARD_GRAVITY);
    let gyro_bias = Vector3::from_fn(|_, _| sign(&mut rng)) * (p.gyro_drift_deg_h / 3600.0).to_radians();

    let to_enu = enu_rotation(cfg.receiver);
    let to_ecef = to_enu.transpose();
    let spoofer_los = cfg.spoofer.map(|s| (s.to_vector() - cfg.receiver.to_vector()).normalize());

    let phases: Vec<Vec<Option<f64>>> = tracks
        .iter()
        .enumerate()
        .map(|(j, track)| {
            let mut ch_rng = rng_stream(seed, STREAM_FIRST_CHANNEL + j as u64);
            channel_phases(cfg, track, ambiguities[j], &to_ecef, &to_enu, spoofer_los, &mut ch_rng)
        })
        .collect();

    let epochs = cfg.gnss_epochs();
    let mut observations = Vec::with_capacity(epochs);
    let mut truth = Vec::with_capacity(epochs);
    for k in 0..epochs {
        let tau = k as f64 / cfg.gnss_rate;
        let mut epoch = ObservationEpoch::new(cfg.start_s + tau);
        for (track, phase) in tracks.iter().zip(&phases) {
            if let Some(v) = phase[k] {
                epoch.channels.insert(
                    track.channel,
                    ChannelObservation {
                        phase: Some(v),
                        lock_lost: false,
                        cn0: Some(NOMINAL_CN0),
                    },
                );
            }
        }
        let label = if spoofed_at(cfg, tau) {
            TruthLabel::Spoofed
        } else {
            TruthLabel::Benign
        };
        truth.push((epoch.t, label));
        observations.push(epoch);
    }

    let imu = imu_stream(cfg, &mut rng_stream(seed, STREAM_IMU), &(accel_bias, gyro_bias));

    let mut sats = SatPositionTable::new();
    let knots = (cfg.duration_s / SAT_TABLE_STEP_S).ceil() as usize;
    for track in &tracks {
        for i in 0..=knots {
            let tau = i as f64 * SAT_TABLE_STEP_S;
            sats.push(
                track.channel.sat,
                cfg.start_s + tau,
                EcefPosition::from_vector(position_at(track, tau)),
            )
            .map_err(|e| ConfigError::Invalid(format!("satellite track: {e}")))?;
        }
    }

    Ok(SyntheticScenario {
        observations,
        imu,
        sats,
        truth,
        receiver: cfg.receiver,
        tracks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(text: &str) -> ScenarioConfig {
        let base = "duration_s=10\nphase_noise=0\nclock_drift=0,0,0\n";
        ScenarioConfig::from_text(&format!("{base}{text}")).unwrap()
    }

    #[test]
    fn geometry_only_phase_steps() {
        let cfg = quiet("motion=none\nauto_sats=4\n");
        let s = generate_scenario(&cfg, 7).unwrap();
        for track in &s.tracks {
            let lambda = track.channel.wavelength();
            for k in [1usize, 50, 150] {
                let t = |k: usize| k as f64 / cfg.gnss_rate;
                let range = |k| (position_at(track, t(k)) - cfg.receiver.to_vector()).norm();
                let expect = (range(k) - range(k - 1)) / lambda;
                let got = s.observations[k].channels[&track.channel].phase.unwrap()
                    - s.observations[k - 1].channels[&track.channel].phase.unwrap();
                assert!((got - expect).abs() < 1e-6, "{got} vs {expect}");
            }
        }
    }

    #[test]
    fn projection_on_orthogonal_channels() {
        let rx = default_receiver();
        let to_ecef = enu_rotation(rx).transpose();
        let east = to_ecef * Vector3::x();
        let north = to_ecef * Vector3::y();
        let p1 = rx.to_vector() + east * 2.2e7;
        let p2 = rx.to_vector() + north * 2.2e7;
        let text = format!(
            "motion.0=1,0,0,0.05,1.25,0\nsat.0=G01,1C,{},{},{},0,0,0\nsat.1=G02,1C,{},{},{},0,0,0\n",
            p1.x, p1.y, p1.z, p2.x, p2.y, p2.z
        );
        let cfg = quiet(&text);
        let s = generate_scenario(&cfg, 1).unwrap();
        let lambda = s.tracks[0].channel.wavelength();
        let series = |ch: &ChannelId| -> Vec<f64> {
            let first = s.observations[0].channels[ch].phase.unwrap();
            s.observations.iter().map(|e| e.channels[ch].phase.unwrap() - first).collect()
        };
        let amp = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let a1 = amp(&series(&s.tracks[0].channel));
        let a2 = amp(&series(&s.tracks[1].channel));
        assert!((a1 - 0.05 / lambda).abs() < 0.01 * 0.05 / lambda, "{a1}");
        assert!(a2 < 1e-6, "{a2}");
    }

    #[test]
    fn spoofed_channels_collapse() {
        let cfg = ScenarioConfig::from_text("duration_s=20\nspoofer_enu=800,300,5\n").unwrap();
        let s = generate_scenario(&cfg, 3).unwrap();
        // remove the geometric trend and clock, which carry no motion
        let chans: Vec<ChannelId> = s.tracks.iter().map(|t| t.channel).collect();
        let residual = |ch: &ChannelId| -> Vec<f64> {
            s.observations
                .iter()
                .enumerate()
                .map(|(k, e)| {
                    let tau = k as f64 / cfg.gnss_rate;
                    let track = s.tracks.iter().find(|t| t.channel == *ch).unwrap();
                    let range = (position_at(track, tau) - cfg.receiver.to_vector()).norm();
                    e.channels[ch].phase.unwrap() - range / ch.wavelength()
                })
                .collect()
        };
        let a = residual(&chans[0]);
        let b = residual(&chans[1]);
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let rms = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
        assert!(rms <= 3.0 * cfg.phase_noise_sigma, "{rms}");
        assert!(s.truth.iter().all(|(_, l)| *l == TruthLabel::Spoofed));
    }

    #[test]
    fn truth_follows_attack_window() {
        let cfg = ScenarioConfig::from_text("duration_s=30\nspoofer_enu=800,300,5\nattack=10,20\n").unwrap();
        let s = generate_scenario(&cfg, 3).unwrap();
        for (k, (t, label)) in s.truth.iter().enumerate() {
            assert_eq!(*t, s.observations[k].t);
            let tau = k as f64 / 20.0;
            let expect = (10.0..20.0).contains(&tau);
            assert_eq!(*label == TruthLabel::Spoofed, expect, "epoch {k}");
        }
    }

    #[test]
    fn same_seed_same_streams() {
        let cfg = ScenarioConfig::from_text("duration_s=5\n").unwrap();
        assert_eq!(generate_scenario(&cfg, 11).unwrap(), generate_scenario(&cfg, 11).unwrap());
        assert_ne!(generate_scenario(&cfg, 11).unwrap().imu, generate_scenario(&cfg, 12).unwrap().imu);
    }

    #[test]
    fn static_imu_reads_gravity_and_field() {
        let cfg = quiet("motion=none\nimu_preset=MTI-3-5A\nbody_attitude=0,0,90\n");
        let s = generate_scenario(&cfg, 5).unwrap();
        let n = s.imu.len() as f64;
        let f = s.imu.iter().map(|x| x.specific_force).sum::<Vector3<f64>>() / n;
        let m = s.imu.iter().map(|x| x.magnetic.unwrap()).sum::<Vector3<f64>>() / n;
        assert!((f - Vector3::new(0.0, 0.0, STANDARD_GRAVITY)).norm() < 0.01, "{f}");
        // yaw 90°: body x points north, so the northward field appears on body x
        assert!((m - Vector3::new(15.0, 0.0, -45.0)).norm() < 0.1, "{m}");
    }

    #[test]
    fn injected_slip_shifts_later_epochs() {
        let cfg = quiet("motion=none\nauto_sats=2\nslip.0=G01,1C,40,3\n");
        let base = quiet("motion=none\nauto_sats=2\n");
        let a = generate_scenario(&cfg, 2).unwrap();
        let b = generate_scenario(&base, 2).unwrap();
        let ch = a.tracks[0].channel;
        let diff = |k: usize| a.observations[k].channels[&ch].phase.unwrap() - b.observations[k].channels[&ch].phase.unwrap();
        assert_eq!(diff(39), 0.0);
        assert!((diff(40) - 3.0).abs() < 1e-6);
        assert!((diff(100) - 3.0).abs() < 1e-6);
    }

    #[test]
    fn sat_table_covers_run() {
        let cfg = ScenarioConfig::from_text("duration_s=25\n").unwrap();
        let s = generate_scenario(&cfg, 0).unwrap();
        s.sats.validate_orbit_class().unwrap();
        let last = s.observations.last().unwrap().t;
        for tr in &s.tracks {
            let p = s.sats.interpolate(&tr.channel.sat, last).unwrap();
            assert!((p.to_vector() - position_at(tr, 25.0)).norm() < 1e-3);
        }
    }
}
