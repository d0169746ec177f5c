use std::path::PathBuf;

use antispoof::config::{parse_key_values, RunConfig};
use antispoof::detector::{run_detection, write_jsonl, DetectorError, Execution};
use antispoof::ingest::{align_streams, parse_imu_csv, parse_rinex_obs, parse_sat_csv};

use crate::error::{read_text, CliError};
use crate::output::write_atomic;

pub struct DetectArgs {
    pub obs: PathBuf,
    pub imu: PathBuf,
    pub sats: PathBuf,
    pub config: Option<PathBuf>,
    pub overrides: Vec<String>,
    pub out: PathBuf,
    pub sequential: bool,
}

fn load_config(args: &DetectArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = read_text(path)?;
        let pairs = parse_key_values(&text).map_err(|e| CliError::config_in(path, e))?;
        for (k, v) in pairs {
            cfg.set(&k, &v).map_err(|e| CliError::config_in(path, e))?;
        }
    }
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set {o:?}: expected KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())
            .map_err(|e| CliError::Config(format!("--set {o:?}: {e}")))?;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

pub fn run(args: &DetectArgs) -> Result<(), CliError> {
    let cfg = load_config(args)?;

    let rinex = parse_rinex_obs(&read_text(&args.obs)?).map_err(|e| CliError::parse_in(&args.obs, e))?;
    let s = rinex.skipped;
    if s.observations + s.satellites + s.events > 0 {
        log::info!(
            "{}: skipped {} observations, {} satellite records, {} event epochs",
            args.obs.display(),
            s.observations,
            s.satellites,
            s.events
        );
    }
    let imu = parse_imu_csv(&read_text(&args.imu)?).map_err(|e| CliError::parse_in(&args.imu, e))?;
    let sats = parse_sat_csv(&read_text(&args.sats)?).map_err(|e| CliError::parse_in(&args.sats, e))?;
    sats.validate_orbit_class()
        .map_err(|e| CliError::parse_in(&args.sats, e))?;

    let receiver = cfg.receiver.or(rinex.header.approx_position).ok_or_else(|| {
        CliError::Config("no receiver position: set receiver=x,y,z or provide APPROX POSITION XYZ".into())
    })?;

    let data = align_streams(rinex.epochs, imu, sats, cfg.imu_time_offset, cfg.window_len + 1)
        .map_err(|e| CliError::Parse(e.to_string()))?;

    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let report = run_detection(&data.observations, &data.imu, &data.sat_table, receiver, &cfg, execution)
        .map_err(|e| match e {
            DetectorError::Config(c) => CliError::Config(c.to_string()),
            other => CliError::Parse(other.to_string()),
        })?;
    log::info!("{:?}", report.stats);

    let mut buf = Vec::new();
    write_jsonl(&mut buf, &report.verdicts).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&args.out, &buf)?;
    print!("{}", report.summary);
    Ok(())
}

