//! Parsers for the observation, IMU and satellite-position files, and
//! alignment of the IMU and GNSS streams onto one timescale.

mod rinex;
mod tables;
pub mod time;

use thiserror::Error;

use crate::carrier::ObservationEpoch;
use crate::geo::SatPositionTable;
use crate::imu::ImuSample;

pub use rinex::{parse_rinex_obs, write_rinex_obs, RinexError, RinexHeader, RinexObs, SkipCounts};
pub use tables::{
    parse_imu_csv, parse_sat_csv, parse_truth_csv, write_imu_csv, write_sat_csv, write_truth_csv,
    CsvError, IMU_HEADER, SAT_HEADER, TRUTH_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error(transparent)]
    Rinex(#[from] RinexError),
    #[error(transparent)]
    Csv(#[from] CsvError),
    #[error("IMU span [{imu_start}, {imu_end}] s covers {epochs} observation epochs, need {required}")]
    NoOverlap {
        imu_start: f64,
        imu_end: f64,
        epochs: usize,
        required: usize,
    },
}

/// Observation and IMU streams on a common timescale.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub observations: Vec<ObservationEpoch>,
    pub imu: Vec<ImuSample>,
    pub sat_table: SatPositionTable,
    /// Offset that was added to every IMU timestamp (s).
    pub imu_time_offset: f64,
}

/// Shifts IMU timestamps by `imu_time_offset` and drops observation epochs
/// outside the shifted IMU span. At least `min_epochs` epochs must remain.
pub fn align_streams(
    observations: Vec<ObservationEpoch>,
    mut imu: Vec<ImuSample>,
    sat_table: SatPositionTable,
    imu_time_offset: f64,
    min_epochs: usize,
) -> Result<AlignedDataset, IngestError> {
    if imu_time_offset != 0.0 {
        for s in &mut imu {
            s.t += imu_time_offset;
        }
    }
    let (imu_start, imu_end) = match (imu.first(), imu.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => (f64::NAN, f64::NAN),
    };
    let observations: Vec<ObservationEpoch> = observations
        .into_iter()
        .filter(|e| e.t >= imu_start && e.t <= imu_end)
        .collect();
    if observations.len() < min_epochs.max(1) {
        return Err(IngestError::NoOverlap {
            imu_start,
            imu_end,
            epochs: observations.len(),
            required: min_epochs.max(1),
        });
    }
    Ok(AlignedDataset {
        observations,
        imu,
        sat_table,
        imu_time_offset,
    })
}
