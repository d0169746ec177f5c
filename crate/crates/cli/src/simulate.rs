use std::path::Path;

use antispoof::ingest::{write_imu_csv, write_rinex_obs, write_sat_csv, write_truth_csv};
use antispoof::synth::{generate_scenario, ScenarioConfig};

use crate::error::{read_text, CliError};
use crate::output::write_atomic;

pub const OBS_FILE: &str = "obs.rnx";
pub const IMU_FILE: &str = "imu.csv";
pub const SATS_FILE: &str = "sats.csv";
pub const TRUTH_FILE: &str = "truth.csv";

pub fn run(scenario: Option<&Path>, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let cfg = match scenario {
        Some(path) => ScenarioConfig::from_text(&read_text(path)?).map_err(|e| CliError::config_in(path, e))?,
        None => ScenarioConfig::default(),
    };
    let s = generate_scenario(&cfg, seed).map_err(|e| CliError::Config(e.to_string()))?;
    let rinex = write_rinex_obs(&s.observations, Some(s.receiver)).map_err(|e| CliError::Config(e.to_string()))?;
    let truth = write_truth_csv(s.truth.iter().map(|(t, l)| (*t, l.as_str())));

    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    write_atomic(&out_dir.join(OBS_FILE), rinex.as_bytes())?;
    write_atomic(&out_dir.join(IMU_FILE), write_imu_csv(&s.imu).as_bytes())?;
    write_atomic(&out_dir.join(SATS_FILE), write_sat_csv(&s.sats).as_bytes())?;
    write_atomic(&out_dir.join(TRUTH_FILE), truth.as_bytes())?;
    println!(
        "{} carrier epochs, {} IMU samples, {} channels written to {}",
        s.observations.len(),
        s.imu.len(),
        s.tracks.len(),
        out_dir.display()
    );
    Ok(())
}
