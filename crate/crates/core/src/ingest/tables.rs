//! IMU, satellite-position and truth-label CSV files.

use nalgebra::Vector3;
use thiserror::Error;

use crate::geo::{EcefPosition, GeoError, SatPositionTable};
use crate::imu::ImuSample;

pub const IMU_HEADER: [&str; 10] = ["t_s", "ax", "ay", "az", "gx", "gy", "gz", "mx", "my", "mz"];
pub const SAT_HEADER: [&str; 5] = ["t_s", "sat", "x_m", "y_m", "z_m"];
pub const TRUTH_HEADER: [&str; 2] = ["t_s", "label"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CsvError {
    #[error("header {found:?} does not match expected {expected:?}")]
    SchemaMismatch { expected: String, found: String },
    #[error("row {row}: timestamp not strictly increasing")]
    NonMonotonicTime { row: usize },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
}

fn malformed(row: usize, reason: impl Into<String>) -> CsvError {
    CsvError::MalformedRow {
        row,
        reason: reason.into(),
    }
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn check_header(rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<(), CsvError> {
    let found = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
    if found.iter().ne(expected.iter().copied()) {
        return Err(CsvError::SchemaMismatch {
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn number(row: usize, name: &str, s: &str) -> Result<f64, CsvError> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(row, format!("{name}: invalid number {s:?}")))
}

/// Parses an IMU CSV; rows are numbered from 1 for the header.
pub fn parse_imu_csv(text: &str) -> Result<Vec<ImuSample>, CsvError> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &IMU_HEADER)?;
    let mut out: Vec<ImuSample> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| malformed(row, e.to_string()))?;
        if rec.len() != IMU_HEADER.len() {
            return Err(malformed(row, format!("{} fields, expected {}", rec.len(), IMU_HEADER.len())));
        }
        let mut v = [0.0; 7];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = number(row, IMU_HEADER[k], &rec[k])?;
        }
        let mag_fields = [&rec[7], &rec[8], &rec[9]];
        let magnetic = if mag_fields.iter().all(|s| s.is_empty()) {
            None
        } else {
            let mut m = [0.0; 3];
            for (k, slot) in m.iter_mut().enumerate() {
                *slot = number(row, IMU_HEADER[7 + k], mag_fields[k])?;
            }
            Some(Vector3::from(m))
        };
        if let Some(prev) = out.last() {
            if !(v[0] > prev.t) {
                return Err(CsvError::NonMonotonicTime { row });
            }
        }
        out.push(ImuSample {
            t: v[0],
            specific_force: Vector3::new(v[1], v[2], v[3]),
            angular_rate: Vector3::new(v[4], v[5], v[6]),
            magnetic,
        });
    }
    Ok(out)
}

/// Writes samples with shortest round-trip float formatting.
pub fn write_imu_csv(samples: &[ImuSample]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(IMU_HEADER).expect("in-memory write");
    for s in samples {
        let f = s.specific_force;
        let g = s.angular_rate;
        let mut rec: Vec<String> = [s.t, f.x, f.y, f.z, g.x, g.y, g.z].iter().map(|v| v.to_string()).collect();
        match s.magnetic {
            Some(m) => rec.extend([m.x, m.y, m.z].iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), 3)),
        }
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

/// Parses a satellite-position CSV into a table.
pub fn parse_sat_csv(text: &str) -> Result<SatPositionTable, CsvError> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &SAT_HEADER)?;
    let mut table = SatPositionTable::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| malformed(row, e.to_string()))?;
        if rec.len() != SAT_HEADER.len() {
            return Err(malformed(row, format!("{} fields, expected {}", rec.len(), SAT_HEADER.len())));
        }
        let t = number(row, "t_s", &rec[0])?;
        let sat = rec[1].parse().map_err(|e| malformed(row, format!("{e}")))?;
        let p = EcefPosition::new(
            number(row, "x_m", &rec[2])?,
            number(row, "y_m", &rec[3])?,
            number(row, "z_m", &rec[4])?,
        );
        table.push(sat, t, p).map_err(|e| match e {
            GeoError::NonMonotonic { .. } => CsvError::NonMonotonicTime { row },
            other => malformed(row, other.to_string()),
        })?;
    }
    Ok(table)
}

pub fn write_sat_csv(table: &SatPositionTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SAT_HEADER).expect("in-memory write");
    for sat in table.satellites() {
        for (t, p) in table.knots(sat).unwrap_or_default() {
            w.write_record([t.to_string(), sat.to_string(), p.x.to_string(), p.y.to_string(), p.z.to_string()])
                .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

/// Writes `t_s,label` rows.
pub fn write_truth_csv<'a>(rows: impl IntoIterator<Item = (f64, &'a str)>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRUTH_HEADER).expect("in-memory write");
    for (t, label) in rows {
        w.write_record([t.to_string().as_str(), label]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ASCII output")
}

/// Parses `t_s,label` rows.
pub fn parse_truth_csv(text: &str) -> Result<Vec<(f64, String)>, CsvError> {
    let mut rdr = reader(text);
    check_header(&mut rdr, &TRUTH_HEADER)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| malformed(row, e.to_string()))?;
        if rec.len() != 2 {
            return Err(malformed(row, "expected 2 fields"));
        }
        out.push((number(row, "t_s", &rec[0])?, rec[1].to_string()));
    }
    Ok(out)
}
