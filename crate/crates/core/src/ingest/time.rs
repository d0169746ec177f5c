//! Calendar dates to continuous seconds since the GPS epoch (1980-01-06).
//! Leap seconds are not applied.

/// Days from 1970-01-01 to the civil date (proleptic Gregorian).
fn days_from_civil(y: i64, m: i64, d: i64) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = y.div_euclid(400);
    let yoe = y - era * 400;
    let mp = (m + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe - 719_468
}

fn civil_from_days(z: i64) -> (i64, i64, i64) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    (if m <= 2 { y + 1 } else { y }, m, d)
}

const GPS_EPOCH_DAYS: i64 = 3657; // 1980-01-06 after 1970-01-01

/// Calendar components of an epoch, seconds carried to 1e-7 s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalendarTime {
    pub year: i64,
    pub month: i64,
    pub day: i64,
    pub hour: i64,
    pub minute: i64,
    /// Whole and fractional seconds as 100 ns ticks within the minute.
    pub ticks: i64,
}

pub const TICKS_PER_SECOND: i64 = 10_000_000;

impl CalendarTime {
    pub fn seconds(&self) -> f64 {
        self.ticks as f64 / TICKS_PER_SECOND as f64
    }
}

/// Seconds since the GPS epoch for a calendar date and time of day.
pub fn gps_seconds(year: i64, month: i64, day: i64, hour: i64, minute: i64, second: f64) -> f64 {
    let days = days_from_civil(year, month, day) - GPS_EPOCH_DAYS;
    (days * 86_400 + hour * 3600 + minute * 60) as f64 + second
}

/// Calendar time of `t` seconds since the GPS epoch, rounded to 100 ns.
pub fn calendar(t: f64) -> Option<CalendarTime> {
    if !t.is_finite() || t.abs() > 1e11 {
        return None;
    }
    let ticks = (t * TICKS_PER_SECOND as f64).round() as i64;
    let per_minute = 60 * TICKS_PER_SECOND;
    let minutes = ticks.div_euclid(per_minute);
    let rest = ticks.rem_euclid(per_minute);
    let days = minutes.div_euclid(1440);
    let minute_of_day = minutes.rem_euclid(1440);
    let (year, month, day) = civil_from_days(days + GPS_EPOCH_DAYS);
    Some(CalendarTime {
        year,
        month,
        day,
        hour: minute_of_day / 60,
        minute: minute_of_day % 60,
        ticks: rest,
    })
}
