use std::fmt::Write as _;
use std::path::Path;

use antispoof::imu::{allan_deviation, decade_taus, ImuSample};
use antispoof::ingest::parse_imu_csv;

use crate::error::{read_text, CliError};
use crate::output::write_atomic;

/// Fewest cluster pairs the estimator accepts; bounds the longest tau.
const MIN_CLUSTERS: usize = 10;

fn axis_values(samples: &[ImuSample], axis: &str) -> Option<Vec<f64>> {
    let (group, idx) = match axis.as_bytes() {
        [g, b'x'] => (*g, 0),
        [g, b'y'] => (*g, 1),
        [g, b'z'] => (*g, 2),
        _ => return None,
    };
    match group {
        b'a' => Some(samples.iter().map(|s| s.specific_force[idx]).collect()),
        b'g' => Some(samples.iter().map(|s| s.angular_rate[idx]).collect()),
        b'm' => samples.iter().map(|s| s.magnetic.map(|m| m[idx])).collect(),
        _ => None,
    }
}

pub fn run(imu: &Path, axis: &str, out: &Path, per_decade: usize) -> Result<(), CliError> {
    let axis = axis.trim().to_ascii_lowercase();
    if !["ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"].contains(&axis.as_str()) {
        return Err(CliError::Config(format!("unknown axis {axis:?}; expected ax..az, gx..gz or mx..mz")));
    }
    if per_decade == 0 {
        return Err(CliError::Config("per-decade must be at least 1".into()));
    }
    let samples = parse_imu_csv(&read_text(imu)?).map_err(|e| CliError::parse_in(imu, e))?;
    let values = axis_values(&samples, &axis)
        .ok_or_else(|| CliError::Parse(format!("{}: axis {axis} has missing values", imu.display())))?;
    if samples.len() < 2 * MIN_CLUSTERS {
        return Err(CliError::Parse(format!("{}: too few samples for Allan deviation", imu.display())));
    }
    let span = samples[samples.len() - 1].t - samples[0].t;
    let rate = (samples.len() - 1) as f64 / span;
    let max_m = samples.len() / MIN_CLUSTERS;
    let taus: Vec<f64> = decade_taus(1.0 / rate, max_m as f64 / rate, per_decade)
        .into_iter()
        .filter(|t| (t * rate).round() as usize <= max_m)
        .collect();
    let mut points = allan_deviation(&values, rate, &taus).map_err(|e| CliError::Parse(e.to_string()))?;
    points.dedup_by(|a, b| a.0 == b.0);

    let mut csv = String::from("tau_s,adev\n");
    for (tau, adev) in points {
        writeln!(csv, "{tau},{adev}").expect("write to String");
    }
    write_atomic(out, csv.as_bytes())
}
