//! Window-level hypothesis test: QR reduction, the two constrained fits and
//! the sign decision, plus the streaming driver over a whole recording.

mod optimize;
mod reduce;
mod run;

pub use optimize::{
    attitude_cost, optimize_attitude, optimize_spoofer_los, sphere_constrained_minimizer, spoofer_cost,
    AttitudeEstimate, OptimizeError, SpooferEstimate, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use reduce::{qr_reduce, reduce_parts, QrArtifacts, RANK_TOLERANCE};
pub use run::{run_detection, DetectionReport, DetectorError, Execution, RunStats};

use std::fmt;

use serde::Serialize;

use crate::geo::UnitVector3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Classification {
    Spoofing,
    NonSpoofing,
    Undefined,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spoofing => "spoofing",
            Self::NonSpoofing => "non_spoofing",
            Self::Undefined => "undefined",
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Why a window produced no decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UndefinedReason {
    /// Peak acceleration below the gate threshold.
    GateClosed,
    TooFewChannels,
    NotIdentifiable,
    /// Both hypotheses fit equally well.
    ZeroStatistic,
}

/// `γ = J_sp − J_nonsp` and its class: positive keeps the benign
/// hypothesis, negative declares spoofing, zero is undecided.
pub fn decide(j_sp: f64, j_nonsp: f64) -> (f64, Classification) {
    let gamma = j_sp - j_nonsp;
    let class = if gamma > 0.0 {
        Classification::NonSpoofing
    } else if gamma < 0.0 {
        Classification::Spoofing
    } else {
        Classification::Undefined
    };
    (gamma, class)
}

/// Outcome of one detection window.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    /// Time of the last epoch of the window (s).
    pub t: f64,
    pub classification: Classification,
    pub undefined_reason: Option<UndefinedReason>,
    pub gamma: Option<f64>,
    pub j_sp: Option<f64>,
    pub j_nonsp: Option<f64>,
    pub attitude: Option<AttitudeEstimate>,
    pub spoofer_los: Option<UnitVector3>,
    pub n_channels: usize,
    pub max_l1_acc: f64,
    pub motion_rank_ok: bool,
}

#[derive(Serialize)]
struct VerdictRecord {
    t: f64,
    verdict: &'static str,
    gamma: Option<f64>,
    j_sp: Option<f64>,
    j_nonsp: Option<f64>,
    n_channels: usize,
    max_l1_acc: f64,
    motion_rank_ok: bool,
}

impl Verdict {
    /// One JSON object on a single line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        let record = VerdictRecord {
            t: self.t,
            verdict: self.classification.as_str(),
            gamma: self.gamma,
            j_sp: self.j_sp,
            j_nonsp: self.j_nonsp,
            n_channels: self.n_channels,
            max_l1_acc: self.max_l1_acc,
            motion_rank_ok: self.motion_rank_ok,
        };
        serde_json::to_string(&record).expect("verdict record serializes")
    }
}

/// Writes verdicts as JSON lines.
pub fn write_jsonl<W: std::io::Write>(mut out: W, verdicts: &[Verdict]) -> std::io::Result<()> {
    for v in verdicts {
        writeln!(out, "{}", v.to_json_line())?;
    }
    Ok(())
}

/// Event counts of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub events: usize,
    pub undefined: usize,
    pub spoofing: usize,
    pub non_spoofing: usize,
}

impl RunSummary {
    pub fn from_verdicts(verdicts: &[Verdict]) -> Self {
        let mut s = Self::default();
        for v in verdicts {
            s.events += 1;
            match v.classification {
                Classification::Spoofing => s.spoofing += 1,
                Classification::NonSpoofing => s.non_spoofing += 1,
                Classification::Undefined => s.undefined += 1,
            }
        }
        s
    }

    pub fn conclusive(&self) -> usize {
        self.spoofing + self.non_spoofing
    }

    /// Share of conclusive events with the given class; `None` without any.
    pub fn rate(&self, class: Classification) -> Option<f64> {
        let n = self.conclusive();
        if n == 0 {
            return None;
        }
        let k = match class {
            Classification::Spoofing => self.spoofing,
            Classification::NonSpoofing => self.non_spoofing,
            Classification::Undefined => return None,
        };
        Some(k as f64 / n as f64)
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "| Events | Undefined | Spoofing | Non-Spoofing |")?;
        writeln!(f, "|--------|-----------|----------|--------------|")?;
        writeln!(
            f,
            "| {:>6} | {:>9} | {:>8} | {:>12} |",
            self.events, self.undefined, self.spoofing, self.non_spoofing
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decide_examples() {
        assert_eq!(decide(10.0, 2.0), (8.0, Classification::NonSpoofing));
        assert_eq!(decide(1.0, 5.0), (-4.0, Classification::Spoofing));
        assert_eq!(decide(3.0, 3.0).1, Classification::Undefined);
    }

    proptest! {
        #[test]
        fn decide_is_antisymmetric(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let (g0, c0) = decide(a, b);
            let (g1, c1) = decide(b, a);
            prop_assert_eq!(g0, -g1);
            let swapped = match c0 {
                Classification::Spoofing => Classification::NonSpoofing,
                Classification::NonSpoofing => Classification::Spoofing,
                Classification::Undefined => Classification::Undefined,
            };
            prop_assert_eq!(c1, swapped);
        }
    }

    fn verdict(class: Classification) -> Verdict {
        Verdict {
            t: 12.5,
            classification: class,
            undefined_reason: None,
            gamma: Some(-1.5),
            j_sp: Some(2.0),
            j_nonsp: Some(3.5),
            attitude: None,
            spoofer_los: None,
            n_channels: 8,
            max_l1_acc: 1.25,
            motion_rank_ok: true,
        }
    }

    #[test]
    fn json_line_format() {
        let line = verdict(Classification::Spoofing).to_json_line();
        assert_eq!(
            line,
            r#"{"t":12.5,"verdict":"spoofing","gamma":-1.5,"j_sp":2.0,"j_nonsp":3.5,"n_channels":8,"max_l1_acc":1.25,"motion_rank_ok":true}"#
        );
        let mut u = verdict(Classification::Undefined);
        u.gamma = None;
        assert!(u.to_json_line().contains(r#""gamma":null"#));
    }

    #[test]
    fn summary_accounting() {
        let vs = vec![
            verdict(Classification::Spoofing),
            verdict(Classification::Spoofing),
            verdict(Classification::NonSpoofing),
            verdict(Classification::Undefined),
        ];
        let s = RunSummary::from_verdicts(&vs);
        assert_eq!(s.events, s.undefined + s.spoofing + s.non_spoofing);
        assert_eq!(s.rate(Classification::Spoofing), Some(2.0 / 3.0));
        let table = s.to_string();
        assert!(table.starts_with("| Events | Undefined | Spoofing | Non-Spoofing |"));
        assert!(table.contains("|      4 |         1 |        2 |            1 |"));
    }
}
