//! Synthetic recordings through the file formats and the detector.

use antispoof::carrier::quadratic_complement;
use antispoof::config::RunConfig;
use antispoof::detector::{run_detection, Classification, Execution};
use antispoof::ingest::{
    align_streams, parse_imu_csv, parse_rinex_obs, parse_sat_csv, write_imu_csv, write_rinex_obs, write_sat_csv,
};
use antispoof::synth::{generate_scenario, ScenarioConfig, SyntheticScenario};

fn scenario(text: &str, seed: u64) -> (ScenarioConfig, SyntheticScenario) {
    let cfg = ScenarioConfig::from_text(text).unwrap();
    let s = generate_scenario(&cfg, seed).unwrap();
    (cfg, s)
}

fn rate(s: &SyntheticScenario, class: Classification) -> f64 {
    let r = run_detection(&s.observations, &s.imu, &s.sats, s.receiver, &RunConfig::default(), Execution::Parallel)
        .unwrap();
    r.summary.rate(class).unwrap()
}

#[test]
fn files_round_trip_within_print_quantization() {
    let (_, s) = scenario("duration_s=30\nspoofer_enu=600,-200,3\nattack=10,20\n", 8);
    let rinex = parse_rinex_obs(&write_rinex_obs(&s.observations, Some(s.receiver)).unwrap()).unwrap();
    assert_eq!(rinex.epochs.len(), s.observations.len());
    let rx = rinex.header.approx_position.unwrap();
    assert!((rx.to_vector() - s.receiver.to_vector()).norm() < 1e-4);
    for (a, b) in rinex.epochs.iter().zip(&s.observations) {
        assert!((a.t - b.t).abs() <= 1e-7, "{} vs {}", a.t, b.t);
        assert_eq!(a.channels.len(), b.channels.len());
        for (ch, o) in &b.channels {
            let p = a.channels[ch];
            assert!((p.phase.unwrap() - o.phase.unwrap()).abs() <= 5e-4 + 1e-6);
            assert_eq!(p.lock_lost, o.lock_lost);
            assert_eq!(p.cn0, o.cn0);
        }
    }
    assert_eq!(parse_imu_csv(&write_imu_csv(&s.imu)).unwrap(), s.imu);
    assert_eq!(parse_sat_csv(&write_sat_csv(&s.sats)).unwrap(), s.sats);
}

#[test]
fn reingested_files_give_the_same_verdicts() {
    let (_, s) = scenario("duration_s=40\nspoofer_enu=600,-200,3\nattack=15,30\n", 8);
    let cfg = RunConfig::default();
    let direct = run_detection(&s.observations, &s.imu, &s.sats, s.receiver, &cfg, Execution::Parallel).unwrap();
    let obs = parse_rinex_obs(&write_rinex_obs(&s.observations, Some(s.receiver)).unwrap()).unwrap();
    let imu = parse_imu_csv(&write_imu_csv(&s.imu)).unwrap();
    let sats = parse_sat_csv(&write_sat_csv(&s.sats)).unwrap();
    let rx = obs.header.approx_position.unwrap();
    let files = run_detection(&obs.epochs, &imu, &sats, rx, &cfg, Execution::Parallel).unwrap();
    let classes = |r: &antispoof::detector::DetectionReport| -> Vec<Classification> {
        r.verdicts.iter().map(|v| v.classification).collect()
    };
    assert_eq!(classes(&direct), classes(&files));
}

#[test]
fn benign_and_spoofed_short_runs() {
    let (_, benign) = scenario("duration_s=60\n", 1);
    let (_, spoofed) = scenario("duration_s=60\nspoofer_enu=700,400,8\n", 1);
    assert!(rate(&benign, Classification::NonSpoofing) >= 0.9);
    assert!(rate(&spoofed, Classification::Spoofing) >= 0.9);
}

#[test]
fn known_time_skew_is_undone_by_offset() {
    let (_, s) = scenario("duration_s=60\n", 6);
    let cfg = RunConfig::default();
    let base = run_detection(&s.observations, &s.imu, &s.sats, s.receiver, &cfg, Execution::Parallel).unwrap();
    let mut skewed = s.imu.clone();
    for x in &mut skewed {
        x.t += 0.120;
    }
    let d = align_streams(s.observations.clone(), skewed, s.sats.clone(), -0.120, cfg.window_len + 1).unwrap();
    let fixed = run_detection(&d.observations, &d.imu, &d.sat_table, s.receiver, &cfg, Execution::Parallel).unwrap();
    let a = base.summary.rate(Classification::NonSpoofing).unwrap();
    let b = fixed.summary.rate(Classification::NonSpoofing).unwrap();
    assert!((a - b).abs() <= 0.02, "{a} vs {b}");
}

/// Per-window high-pass phase of every channel, one row per epoch block.
fn highpass_blocks(s: &SyntheticScenario) -> Vec<Vec<Vec<f64>>> {
    let channels: Vec<_> = s.tracks.iter().map(|t| t.channel).collect();
    s.observations
        .chunks_exact(21)
        .map(|block| {
            channels
                .iter()
                .map(|ch| {
                    let p0 = block[0].channels[ch].phase.unwrap();
                    let rel: Vec<f64> = block.iter().map(|e| e.channels[ch].phase.unwrap() - p0).collect();
                    quadratic_complement(&rel).iter().copied().collect()
                })
                .collect()
        })
        .collect()
}

#[test]
fn spoofed_channels_collapse_across_seeds() {
    for seed in 0..10 {
        let (cfg, s) = scenario("duration_s=20\nspoofer_enu=700,400,8\n", seed);
        for block in highpass_blocks(&s) {
            for j in 1..block.len() {
                let d: Vec<f64> = block[0].iter().zip(&block[j]).map(|(a, b)| a - b).collect();
                let rms = (d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64).sqrt();
                assert!(rms <= 3.0 * cfg.phase_noise_sigma, "seed {seed}: {rms}");
            }
        }
    }
}

#[test]
fn benign_spread_exceeds_spoofed_spread() {
    let spread = |s: &SyntheticScenario| -> f64 {
        let blocks = highpass_blocks(s);
        let mut total = 0.0;
        for block in &blocks {
            for k in 0..block[0].len() {
                let col: Vec<f64> = block.iter().map(|ch| ch[k]).collect();
                let m = col.iter().sum::<f64>() / col.len() as f64;
                total += col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
            }
        }
        total
    };
    let mut wins = 0;
    for seed in 0..20 {
        let (_, benign) = scenario("duration_s=10\nauto_sats=4\n", seed);
        let (_, spoofed) = scenario("duration_s=10\nauto_sats=4\nspoofer_enu=700,400,8\n", seed);
        if spread(&benign) > spread(&spoofed) {
            wins += 1;
        }
    }
    assert!(wins >= 19, "{wins}/20");
}
