use nalgebra::Matrix3;
use thiserror::Error;

use super::optimize::{optimize_attitude, optimize_spoofer_los};
use super::reduce::{qr_reduce, QrArtifacts};
use super::{decide, Classification, RunSummary, UndefinedReason, Verdict};
use crate::carrier::{build_design_matrix, extract_window, CarrierError, ChannelId, ObservationEpoch, WindowRules};
use crate::config::{ConfigError, RunConfig};
use crate::geo::{enu_rotation, EcefPosition, SatPositionTable, UnitVector3};
use crate::imu::{
    estimate_attitude, integrate_displacement, linear_acceleration, max_l1_norm, DisplacementSeries, ImuError,
    ImuSample,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectorError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("inertial processing: {0}")]
    Imu(#[from] ImuError),
    #[error("need at least two observation epochs")]
    NoObservations,
    #[error("observation timestamps not strictly increasing at epoch {0}")]
    NonMonotonicEpochs(usize),
}

/// How windows are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Data-parallel over windows; sequential when built without the
    /// `parallel` feature.
    #[default]
    Parallel,
}

/// Channel bookkeeping of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunStats {
    pub windows: usize,
    pub channels_used: usize,
    pub below_mask: usize,
    pub no_position: usize,
    pub slipped: usize,
    pub gaps: usize,
    pub incomplete: usize,
}

impl RunStats {
    fn merge(&mut self, o: &RunStats) {
        self.windows += o.windows;
        self.channels_used += o.channels_used;
        self.below_mask += o.below_mask;
        self.no_position += o.no_position;
        self.slipped += o.slipped;
        self.gaps += o.gaps;
        self.incomplete += o.incomplete;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub verdicts: Vec<Verdict>,
    pub summary: RunSummary,
    pub stats: RunStats,
}

struct Context<'a> {
    observations: &'a [ObservationEpoch],
    sats: &'a SatPositionTable,
    receiver: EcefPosition,
    to_enu: Matrix3<f64>,
    displacement: DisplacementSeries,
    rules: WindowRules,
    config: &'a RunConfig,
    sin_mask: f64,
}

/// Runs the test over every window of an aligned recording.
///
/// Windows end at epochs `burn_in + window_len`, then every `stride`
/// epochs. The inertial chain runs once over the whole IMU stream before
/// the windows, which are independent of each other.
pub fn run_detection(
    observations: &[ObservationEpoch],
    imu: &[ImuSample],
    sats: &SatPositionTable,
    receiver: EcefPosition,
    config: &RunConfig,
    execution: Execution,
) -> Result<DetectionReport, DetectorError> {
    config.validate()?;
    if observations.len() < 2 {
        return Err(DetectorError::NoObservations);
    }
    for (i, w) in observations.windows(2).enumerate() {
        if !(w[1].t > w[0].t) {
            return Err(DetectorError::NonMonotonicEpochs(i + 1));
        }
    }
    if !receiver.is_finite() || receiver.norm() < 1.0 {
        return Err(ConfigError::Invalid("receiver position degenerate".into()).into());
    }

    let attitudes = estimate_attitude(imu, config.attitude_gain, config.attitude_init)?;
    let a_lin = linear_acceleration(imu, &attitudes)?;
    let t: Vec<f64> = imu.iter().map(|s| s.t).collect();
    let displacement = integrate_displacement(&t, &a_lin, config.hp_cutoff)?;

    let mut spacing: Vec<f64> = observations.windows(2).map(|w| w[1].t - w[0].t).collect();
    spacing.sort_by(f64::total_cmp);
    let nominal_spacing = spacing[spacing.len() / 2];

    let ctx = Context {
        observations,
        sats,
        receiver,
        to_enu: enu_rotation(receiver),
        displacement,
        rules: WindowRules {
            n: config.window_len,
            nominal_spacing,
            slip_threshold: config.slip_threshold,
            sigma_floor: config.sigma_floor,
        },
        config,
        sin_mask: config.elevation_mask.to_radians().sin(),
    };

    let ends: Vec<usize> = (config.burn_in + config.window_len..observations.len())
        .step_by(config.stride)
        .collect();
    let outcomes = evaluate_all(&ctx, &ends, execution);

    let mut stats = RunStats::default();
    let mut verdicts = Vec::with_capacity(outcomes.len());
    for (v, s) in outcomes {
        stats.merge(&s);
        verdicts.push(v);
    }
    Ok(DetectionReport {
        summary: RunSummary::from_verdicts(&verdicts),
        verdicts,
        stats,
    })
}

fn evaluate_all(ctx: &Context, ends: &[usize], execution: Execution) -> Vec<(Verdict, RunStats)> {
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            ends.par_iter().map(|&e| evaluate_window(ctx, e)).collect()
        }
        _ => ends.iter().map(|&e| evaluate_window(ctx, e)).collect(),
    }
}

fn undefined(t: f64, reason: UndefinedReason, n_channels: usize, max_l1_acc: f64, rank_ok: bool) -> Verdict {
    Verdict {
        t,
        classification: Classification::Undefined,
        undefined_reason: Some(reason),
        gamma: None,
        j_sp: None,
        j_nonsp: None,
        attitude: None,
        spoofer_los: None,
        n_channels,
        max_l1_acc,
        motion_rank_ok: rank_ok,
    }
}

/// Line of sight in the local frame, or `None` below the mask or without a position.
fn local_los(ctx: &Context, channel: &ChannelId, t: f64, stats: &mut RunStats) -> Option<UnitVector3> {
    let Ok(sat) = ctx.sats.interpolate(&channel.sat, t) else {
        stats.no_position += 1;
        return None;
    };
    let d = ctx.to_enu * (sat.to_vector() - ctx.receiver.to_vector());
    let Some(u) = UnitVector3::new_normalize(d) else {
        stats.no_position += 1;
        return None;
    };
    if u.as_vector().z < ctx.sin_mask {
        stats.below_mask += 1;
        return None;
    }
    Some(u)
}

fn evaluate_window(ctx: &Context, end: usize) -> (Verdict, RunStats) {
    let mut stats = RunStats {
        windows: 1,
        ..RunStats::default()
    };
    let obs = ctx.observations;
    let start = end - ctx.config.window_len;
    let (t0, t1) = (obs[start].t, obs[end].t);

    let range = ctx.displacement.index_range(t0, t1);
    let max_l1_acc = max_l1_norm(&ctx.displacement.a_lin[range]);
    if !(max_l1_acc >= ctx.config.acc_threshold) {
        return (undefined(t1, UndefinedReason::GateClosed, 0, max_l1_acc, true), stats);
    }

    let mut artifacts: Vec<QrArtifacts> = Vec::new();
    for (channel, o) in &obs[end].channels {
        if o.phase.is_none() {
            continue;
        }
        let Some(los) = local_los(ctx, channel, t0, &mut stats) else {
            continue;
        };
        match extract_window(obs, *channel, end, &ctx.displacement, los, &ctx.rules) {
            Ok(w) => artifacts.push(qr_reduce(&build_design_matrix(&w))),
            Err(CarrierError::CycleSlipInWindow { .. }) => stats.slipped += 1,
            Err(CarrierError::GapInWindow { .. }) => stats.gaps += 1,
            Err(_) => stats.incomplete += 1,
        }
    }
    stats.channels_used = artifacts.len();
    let n = artifacts.len();
    let rank_ok = artifacts.iter().all(|a| a.motion_rank_ok);
    if n < ctx.config.min_channels {
        return (undefined(t1, UndefinedReason::TooFewChannels, n, max_l1_acc, rank_ok), stats);
    }

    let nonsp = match optimize_attitude(&artifacts, ctx.config.optimizer_tol, ctx.config.optimizer_max_iter) {
        Ok(a) => a,
        Err(_) => return (undefined(t1, UndefinedReason::NotIdentifiable, n, max_l1_acc, rank_ok), stats),
    };
    let sp = optimize_spoofer_los(&artifacts);
    let (gamma, classification) = decide(sp.cost, nonsp.cost);
    let verdict = Verdict {
        t: t1,
        classification,
        undefined_reason: (classification == Classification::Undefined).then_some(UndefinedReason::ZeroStatistic),
        gamma: Some(gamma),
        j_sp: Some(sp.cost),
        j_nonsp: Some(nonsp.cost),
        attitude: Some(nonsp),
        spoofer_los: Some(sp.r),
        n_channels: n,
        max_l1_acc,
        motion_rank_ok: rank_ok,
    };
    (verdict, stats)
}
