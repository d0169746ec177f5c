//! RINEX 3 observation files: the carrier-phase and C/N0 subset.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::time::{calendar, gps_seconds, TICKS_PER_SECOND};
use crate::carrier::{ChannelId, ChannelObservation, Constellation, ObservationEpoch, SatId, SignalCode};
use crate::geo::EcefPosition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RinexError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed epoch: {reason}")]
    MalformedEpoch { line: usize, reason: String },
    #[error("unsupported RINEX version {0:?} (3.x required)")]
    UnsupportedVersion(String),
    #[error("cannot write: {0}")]
    Unwritable(String),
}

/// Header fields the detector uses.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RinexHeader {
    pub version: String,
    pub approx_position: Option<EcefPosition>,
    /// Observation codes per constellation code, in file order.
    pub obs_types: BTreeMap<char, Vec<String>>,
}

/// Items read but not used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SkipCounts {
    /// Non-phase, non-C/N0 observation values, and unknown signal codes.
    pub observations: usize,
    /// Satellite records of unsupported systems.
    pub satellites: usize,
    /// Special-event epochs.
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RinexObs {
    pub header: RinexHeader,
    pub epochs: Vec<ObservationEpoch>,
    pub skipped: SkipCounts,
}

fn header_err(line: usize, reason: impl Into<String>) -> RinexError {
    RinexError::MalformedHeader {
        line,
        reason: reason.into(),
    }
}

fn epoch_err(line: usize, reason: impl Into<String>) -> RinexError {
    RinexError::MalformedEpoch {
        line,
        reason: reason.into(),
    }
}

/// Byte-column field, empty when the line is shorter.
fn field(line: &str, start: usize, end: usize) -> &str {
    let end = end.min(line.len());
    if start >= end {
        ""
    } else {
        &line[start..end]
    }
}

/// What an observation code contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Phase(ChannelId),
    Cn0(ChannelId),
    Skip,
}

fn slot_for(system: char, code: &str) -> Slot {
    let b = code.as_bytes();
    if b.len() != 3 {
        return Slot::Skip;
    }
    let Some(constellation) = Constellation::from_code(system) else {
        return Slot::Skip;
    };
    if !b[2].is_ascii_alphanumeric() {
        return Slot::Skip;
    }
    // PRN is filled in per record; 1 is a placeholder for band validation
    let Some(channel) = ChannelId::new(SatId::new(constellation, 1), SignalCode([b[1], b[2]])) else {
        return Slot::Skip;
    };
    match b[0] {
        b'L' => Slot::Phase(channel),
        b'S' => Slot::Cn0(channel),
        _ => Slot::Skip,
    }
}

/// Parses a RINEX 3 observation file.
pub fn parse_rinex_obs(text: &str) -> Result<RinexObs, RinexError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut header = RinexHeader::default();
    let mut pending_types: Option<(char, usize)> = None;
    let mut saw_version = false;
    let mut saw_end = false;

    for (no, line) in lines.by_ref() {
        if !line.is_ascii() {
            return Err(header_err(no, "non-ASCII characters"));
        }
        let label = field(line, 60, 80).trim();
        let content = field(line, 0, 60);
        if !saw_version {
            if label != "RINEX VERSION / TYPE" {
                return Err(header_err(no, "first line must be RINEX VERSION / TYPE"));
            }
            let version = field(content, 0, 9).trim().to_string();
            if !version.starts_with('3') {
                return Err(RinexError::UnsupportedVersion(version));
            }
            if field(content, 20, 21) != "O" {
                return Err(header_err(no, "not an observation file"));
            }
            header.version = version;
            saw_version = true;
            continue;
        }
        match label {
            "APPROX POSITION XYZ" => {
                let mut v = [0.0; 3];
                for (k, slot) in v.iter_mut().enumerate() {
                    let s = field(content, 14 * k, 14 * (k + 1)).trim();
                    *slot = s
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| header_err(no, format!("bad coordinate {s:?}")))?;
                }
                header.approx_position = Some(EcefPosition::new(v[0], v[1], v[2]));
            }
            "SYS / # / OBS TYPES" => {
                let sys = field(content, 0, 1);
                let (system, remaining) = if sys.trim().is_empty() {
                    // continuation line
                    pending_types.ok_or_else(|| header_err(no, "continuation without a system"))?
                } else {
                    let system = sys.chars().next().unwrap_or(' ');
                    let count: usize = field(content, 3, 6)
                        .trim()
                        .parse()
                        .map_err(|_| header_err(no, "bad observation type count"))?;
                    if count > 999 {
                        return Err(header_err(no, "observation type count too large"));
                    }
                    header.obs_types.insert(system, Vec::with_capacity(count));
                    (system, count)
                };
                let types = header.obs_types.entry(system).or_default();
                let mut left = remaining;
                for k in 0..13 {
                    if left == 0 {
                        break;
                    }
                    let code = field(content, 7 + 4 * k, 10 + 4 * k).trim();
                    if code.is_empty() {
                        break;
                    }
                    types.push(code.to_string());
                    left -= 1;
                }
                pending_types = (left > 0).then_some((system, left));
            }
            "END OF HEADER" => {
                saw_end = true;
                break;
            }
            _ => {}
        }
    }
    if !saw_version {
        return Err(header_err(1, "empty file"));
    }
    if !saw_end {
        return Err(header_err(0, "missing END OF HEADER"));
    }
    if let Some((sys, left)) = pending_types {
        return Err(header_err(0, format!("system {sys}: {left} observation types missing")));
    }

    let slots: BTreeMap<char, Vec<Slot>> = header
        .obs_types
        .iter()
        .map(|(&sys, codes)| (sys, codes.iter().map(|c| slot_for(sys, c)).collect()))
        .collect();

    let mut epochs = Vec::new();
    let mut skipped = SkipCounts::default();
    while let Some((no, line)) = lines.next() {
        if line.trim().is_empty() {
            continue;
        }
        if !line.is_ascii() {
            return Err(epoch_err(no, "non-ASCII characters"));
        }
        if !line.starts_with('>') {
            return Err(epoch_err(no, "expected epoch record starting with '>'"));
        }
        let (t, flag, count) = parse_epoch_line(no, line)?;
        if flag > 1 {
            skipped.events += 1;
            for _ in 0..count {
                if lines.next().is_none() {
                    return Err(epoch_err(no, "event records truncated"));
                }
            }
            continue;
        }
        let mut epoch = ObservationEpoch::new(t);
        for _ in 0..count {
            let Some((rno, rec)) = lines.next() else {
                return Err(epoch_err(no, format!("expected {count} satellite records")));
            };
            if !rec.is_ascii() {
                return Err(epoch_err(rno, "non-ASCII characters"));
            }
            if rec.starts_with('>') {
                return Err(epoch_err(rno, "epoch record where a satellite record was expected"));
            }
            parse_sat_record(rno, rec, &slots, &mut epoch, &mut skipped)?;
        }
        if let Some(prev) = epochs.last().map(|e: &ObservationEpoch| e.t) {
            if !(t > prev) {
                return Err(epoch_err(no, "epoch time not increasing"));
            }
        }
        epochs.push(epoch);
    }
    Ok(RinexObs {
        header,
        epochs,
        skipped,
    })
}

fn parse_int(no: usize, s: &str, what: &str, range: std::ops::RangeInclusive<i64>) -> Result<i64, RinexError> {
    let v: i64 = s
        .trim()
        .parse()
        .map_err(|_| epoch_err(no, format!("bad {what} {s:?}")))?;
    if !range.contains(&v) {
        return Err(epoch_err(no, format!("{what} {v} out of range")));
    }
    Ok(v)
}

fn parse_epoch_line(no: usize, line: &str) -> Result<(f64, u8, usize), RinexError> {
    if line.len() < 35 {
        return Err(epoch_err(no, "epoch record too short"));
    }
    let year = parse_int(no, field(line, 2, 6), "year", 1980..=2200)?;
    let month = parse_int(no, field(line, 6, 9), "month", 1..=12)?;
    let day = parse_int(no, field(line, 9, 12), "day", 1..=31)?;
    let hour = parse_int(no, field(line, 12, 15), "hour", 0..=23)?;
    let minute = parse_int(no, field(line, 15, 18), "minute", 0..=59)?;
    let sec_text = field(line, 18, 29).trim();
    let second: f64 = sec_text
        .parse()
        .ok()
        .filter(|s: &f64| (0.0..61.0).contains(s))
        .ok_or_else(|| epoch_err(no, format!("bad seconds {sec_text:?}")))?;
    let flag = parse_int(no, field(line, 31, 32), "epoch flag", 0..=6)? as u8;
    let count = parse_int(no, field(line, 32, 35), "satellite count", 0..=999)? as usize;
    Ok((gps_seconds(year, month, day, hour, minute, second), flag, count))
}

fn parse_sat_record(
    no: usize,
    rec: &str,
    slots: &BTreeMap<char, Vec<Slot>>,
    epoch: &mut ObservationEpoch,
    skipped: &mut SkipCounts,
) -> Result<(), RinexError> {
    let id = field(rec, 0, 3);
    let system = id.chars().next().unwrap_or(' ');
    let Some(sys_slots) = slots.get(&system) else {
        if system.is_ascii_alphabetic() {
            skipped.satellites += 1;
            return Ok(());
        }
        return Err(epoch_err(no, format!("bad satellite id {id:?}")));
    };
    let sat: SatId = match id.parse() {
        Ok(s) => s,
        Err(_) if Constellation::from_code(system).is_none() => {
            skipped.satellites += 1;
            return Ok(());
        }
        Err(_) => return Err(epoch_err(no, format!("bad satellite id {id:?}"))),
    };
    for (k, slot) in sys_slots.iter().enumerate() {
        let base = 3 + 16 * k;
        let value = field(rec, base, base + 14).trim();
        let lli = field(rec, base + 14, base + 15).trim();
        if value.is_empty() {
            continue;
        }
        let (channel, is_phase) = match slot {
            Slot::Phase(c) => (c, true),
            Slot::Cn0(c) => (c, false),
            Slot::Skip => {
                skipped.observations += 1;
                continue;
            }
        };
        let v: f64 = value
            .parse()
            .ok()
            .filter(|x: &f64| x.is_finite())
            .ok_or_else(|| epoch_err(no, format!("bad observation value {value:?}")))?;
        let lock_lost = if lli.is_empty() {
            false
        } else {
            let d = parse_int(no, lli, "loss-of-lock indicator", 0..=9)?;
            d & 1 == 1
        };
        let channel = ChannelId { sat, ..*channel };
        let entry = epoch.channels.entry(channel).or_insert(ChannelObservation {
            phase: None,
            lock_lost: false,
            cn0: None,
        });
        if is_phase {
            entry.phase = Some(v);
            entry.lock_lost |= lock_lost;
        } else {
            entry.cn0 = Some(v);
        }
    }
    Ok(())
}

/// Largest magnitude printable in an F14.3 field.
const MAX_FIELD: f64 = 9_999_999_999.999;

/// Writes epochs as a RINEX 3.04 observation file with `L` and `S` codes.
pub fn write_rinex_obs(
    epochs: &[ObservationEpoch],
    approx_position: Option<EcefPosition>,
) -> Result<String, RinexError> {
    let mut signals: BTreeMap<char, Vec<SignalCode>> = BTreeMap::new();
    for e in epochs {
        for ch in e.channels.keys() {
            let list = signals.entry(ch.sat.constellation.code()).or_default();
            if !list.contains(&ch.signal) {
                list.push(ch.signal);
            }
        }
    }
    for list in signals.values_mut() {
        list.sort();
    }

    let mut out = String::new();
    let mixed = if signals.len() == 1 {
        *signals.keys().next().unwrap()
    } else {
        'M'
    };
    header_line(
        &mut out,
        &format!("{:>9}{:11}{:<20}{:<20}", "3.04", "", "OBSERVATION DATA", mixed),
        "RINEX VERSION / TYPE",
    );
    header_line(&mut out, &format!("{:<20}{:<20}{:<20}", "antispoof", "", ""), "PGM / RUN BY / DATE");
    header_line(&mut out, "SYNTHETIC", "MARKER NAME");
    if let Some(p) = approx_position {
        header_line(&mut out, &format!("{:14.4}{:14.4}{:14.4}", p.x, p.y, p.z), "APPROX POSITION XYZ");
    }
    for (sys, list) in &signals {
        let codes: Vec<String> = list
            .iter()
            .flat_map(|s| [format!("L{s}"), format!("S{s}")])
            .collect();
        for (k, chunk) in codes.chunks(13).enumerate() {
            let mut content = if k == 0 {
                format!("{sys}  {:>3}", codes.len())
            } else {
                " ".repeat(6)
            };
            for c in chunk {
                let _ = write!(content, " {c:>3}");
            }
            header_line(&mut out, &content, "SYS / # / OBS TYPES");
        }
    }
    if let Some(first) = epochs.first() {
        let c = calendar(first.t).ok_or_else(|| RinexError::Unwritable(format!("time {}", first.t)))?;
        header_line(
            &mut out,
            &format!(
                "{:>6}{:>6}{:>6}{:>6}{:>6}{:>13}     GPS",
                c.year,
                c.month,
                c.day,
                c.hour,
                c.minute,
                format_seconds(c.ticks)
            ),
            "TIME OF FIRST OBS",
        );
    }
    header_line(&mut out, "", "END OF HEADER");

    for e in epochs {
        let c = calendar(e.t).ok_or_else(|| RinexError::Unwritable(format!("time {}", e.t)))?;
        let mut by_sat: BTreeMap<SatId, Vec<(SignalCode, &ChannelObservation)>> = BTreeMap::new();
        for (ch, o) in &e.channels {
            by_sat.entry(ch.sat).or_default().push((ch.signal, o));
        }
        if by_sat.len() > 999 {
            return Err(RinexError::Unwritable("more than 999 satellites in one epoch".into()));
        }
        let _ = writeln!(
            out,
            "> {:04} {:02} {:02} {:02} {:02}{:>11}  0{:>3}",
            c.year,
            c.month,
            c.day,
            c.hour,
            c.minute,
            format_seconds(c.ticks),
            by_sat.len()
        );
        for (sat, obs) in by_sat {
            let mut line = sat.to_string();
            for sig in &signals[&sat.constellation.code()] {
                let o = obs.iter().find(|(s, _)| s == sig).map(|(_, o)| *o);
                let phase = o.and_then(|o| o.phase);
                let lli = o.is_some_and(|o| o.lock_lost);
                push_value(&mut line, phase, lli)?;
                push_value(&mut line, o.and_then(|o| o.cn0), false)?;
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
    }
    Ok(out)
}

fn push_value(line: &mut String, v: Option<f64>, lli: bool) -> Result<(), RinexError> {
    match v {
        Some(v) => {
            if !(v.abs() <= MAX_FIELD) {
                return Err(RinexError::Unwritable(format!("value {v} does not fit F14.3")));
            }
            let _ = write!(line, "{v:14.3}{} ", if lli { '1' } else { ' ' });
        }
        None => line.push_str(&" ".repeat(16)),
    }
    Ok(())
}

fn format_seconds(ticks: i64) -> String {
    format!("{}.{:07}", ticks / TICKS_PER_SECOND, ticks % TICKS_PER_SECOND)
}

fn header_line(out: &mut String, content: &str, label: &str) {
    let _ = writeln!(out, "{content:<60}{label:<20}");
}
