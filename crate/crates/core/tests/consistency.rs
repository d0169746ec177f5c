//! Noiseless windows: the hypothesis that generated the data fits exactly.

use antispoof::carrier::{
    build_design_matrix, extract_window, ChannelId, ChannelObservation, Constellation, ObservationEpoch, SatId,
    SignalCode, WindowRules,
};
use antispoof::detector::{decide, optimize_attitude, optimize_spoofer_los, qr_reduce, Classification, QrArtifacts};
use antispoof::geo::UnitVector3;
use antispoof::imu::DisplacementSeries;
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const N: usize = 20;
const RATE: f64 = 20.0;

fn channel(prn: u8) -> ChannelId {
    ChannelId::new(SatId::new(Constellation::Gps, prn), SignalCode(*b"1C")).unwrap()
}

fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm() > 0.2 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

/// Three-axis motion in the line-of-sight frame, sampled at the carrier epochs.
fn motion(rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let f: [f64; 3] = [rng.random_range(1.5..2.5), rng.random_range(2.0..3.0), rng.random_range(3.0..4.0)];
    let p: [f64; 3] = [rng.random_range(0.0..6.0), rng.random_range(0.0..6.0), rng.random_range(0.0..6.0)];
    (0..=N)
        .map(|k| {
            let t = k as f64 / RATE;
            Vector3::from_fn(|i, _| 0.05 * (std::f64::consts::TAU * f[i] * t + p[i]).sin())
        })
        .collect()
}

/// Per-channel artifacts for phases built from `projection(los, b)` plus a
/// quadratic, with the displacement delivered in a rotated frame.
fn artifacts(
    rng: &mut ChaCha8Rng,
    n_channels: usize,
    projection: impl Fn(&Vector3<f64>, &Vector3<f64>) -> f64,
) -> (Vec<QrArtifacts>, Rotation3<f64>) {
    let b = motion(rng);
    let frame = Rotation3::from_scaled_axis(unit(rng) * rng.random_range(0.0..3.0));
    let t: Vec<f64> = (0..=N).map(|k| 1000.0 + k as f64 / RATE).collect();
    let series = DisplacementSeries::from_displacement(t.clone(), b.iter().map(|v| frame * v).collect());
    let mut epochs: Vec<ObservationEpoch> = t.iter().map(|&t| ObservationEpoch::new(t)).collect();
    let mut los = Vec::new();
    for j in 0..n_channels {
        let ch = channel(j as u8 + 1);
        let r = unit(rng);
        let wavelength = ch.wavelength();
        let q = [rng.random_range(-50.0..50.0), rng.random_range(-5.0..5.0), rng.random_range(-0.5..0.5)];
        for (k, e) in epochs.iter_mut().enumerate() {
            let x = k as f64;
            let phase = q[0] + q[1] * x + q[2] * x * x + projection(&r, &b[k]) / wavelength;
            e.channels.insert(
                ch,
                ChannelObservation {
                    phase: Some(phase),
                    lock_lost: false,
                    cn0: None,
                },
            );
        }
        los.push((ch, r));
    }
    let rules = WindowRules {
        n: N,
        nominal_spacing: 1.0 / RATE,
        // slip screening assumes the displacement frame is the line-of-sight
        // frame, which the rotated frame here violates on purpose
        slip_threshold: 1e3,
        sigma_floor: 1e-3,
    };
    let arts = los
        .iter()
        .map(|(ch, r)| {
            let w = extract_window(&epochs, *ch, N, &series, UnitVector3::new_normalize(*r).unwrap(), &rules).unwrap();
            qr_reduce(&build_design_matrix(&w))
        })
        .collect();
    (arts, frame)
}

#[test]
fn noiseless_benign_fits_rotation_hypothesis() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..25 {
        let (arts, frame) = artifacts(&mut rng, 6, |r, b| r.dot(b));
        let att = optimize_attitude(&arts, 1e-12, 200).unwrap();
        let sp = optimize_spoofer_los(&arts);
        assert!(att.cost <= 1e-9, "J_nonsp = {}", att.cost);
        assert!(sp.cost > 0.0);
        assert_eq!(decide(sp.cost, att.cost).1, Classification::NonSpoofing);
        // the estimate maps lines of sight into the displacement frame
        assert!((att.a.matrix() - frame.matrix()).norm() < 1e-6);
    }
}

#[test]
fn noiseless_spoofed_fits_single_source() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..25 {
        let sp_dir = unit(&mut rng);
        let (arts, _) = artifacts(&mut rng, 6, |_, b| sp_dir.dot(b));
        let sp = optimize_spoofer_los(&arts);
        let att = optimize_attitude(&arts, 1e-12, 200).unwrap();
        assert!(sp.cost <= 1e-9, "J_sp = {}", sp.cost);
        assert!(att.cost > 0.0);
        assert_eq!(decide(sp.cost, att.cost).1, Classification::Spoofing);
    }
}
