//! Carrier-phase channels, window extraction, cycle-slip screening, noise
//! scale estimation and the per-window polynomial + motion design system.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::geo::UnitVector3;
use crate::imu::DisplacementSeries;
use crate::qr::Householder;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default jump threshold for slip screening (cycles).
pub const DEFAULT_SLIP_THRESHOLD: f64 = 0.5;

/// Default floor applied to the per-window noise scale (cycles).
pub const DEFAULT_SIGMA_FLOOR: f64 = 1e-3;

/// Consistency constant turning a median absolute deviation into a Gaussian σ.
const MAD_TO_SIGMA: f64 = 1.4826;

/// Columns of the design system: three polynomial terms and three motion terms.
pub const DESIGN_COLUMNS: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarrierError {
    #[error("window ending at epoch {end} needs {needed} epochs but only {available} available")]
    NotEnoughEpochs {
        end: usize,
        needed: usize,
        available: usize,
    },
    #[error("{channel}: gap of {gap:.3} s inside window (nominal spacing {nominal:.3} s)")]
    GapInWindow {
        channel: ChannelId,
        gap: f64,
        nominal: f64,
    },
    #[error("{channel}: cycle slip at epoch {epoch} inside window")]
    CycleSlipInWindow { channel: ChannelId, epoch: usize },
    #[error("{channel}: no phase at epoch {epoch}")]
    ChannelMissing { channel: ChannelId, epoch: usize },
    #[error("{channel}: carrier epoch at {t} s not covered by the displacement series")]
    OutsideImuSpan { channel: ChannelId, t: f64 },
    #[error("window too short: {0} samples (need at least 8)")]
    WindowTooShort(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constellation {
    Gps,
    Galileo,
    BeiDou,
    Qzss,
    Sbas,
}

impl Constellation {
    pub fn code(self) -> char {
        match self {
            Constellation::Gps => 'G',
            Constellation::Galileo => 'E',
            Constellation::BeiDou => 'C',
            Constellation::Qzss => 'J',
            Constellation::Sbas => 'S',
        }
    }

    pub fn from_code(c: char) -> Option<Self> {
        Some(match c {
            'G' => Constellation::Gps,
            'E' => Constellation::Galileo,
            'C' => Constellation::BeiDou,
            'J' => Constellation::Qzss,
            'S' => Constellation::Sbas,
            _ => return None,
        })
    }

    /// Carrier frequency (Hz) of a RINEX band digit, when the band is CDMA.
    pub fn band_frequency(self, band: u8) -> Option<f64> {
        let mhz = match (self, band) {
            (Constellation::Gps | Constellation::Qzss | Constellation::Sbas, b'1') => 1575.42,
            (Constellation::Gps | Constellation::Qzss, b'2') => 1227.60,
            (_, b'5') => 1176.45,
            (Constellation::Qzss, b'6') => 1278.75,
            (Constellation::Galileo | Constellation::BeiDou, b'1') => 1575.42,
            (Constellation::Galileo, b'6') => 1278.75,
            (Constellation::Galileo | Constellation::BeiDou, b'7') => 1207.14,
            (Constellation::Galileo | Constellation::BeiDou, b'8') => 1191.795,
            (Constellation::BeiDou, b'2') => 1561.098,
            (Constellation::BeiDou, b'6') => 1268.52,
            _ => return None,
        };
        Some(mhz * 1e6)
    }
}

/// Satellite identifier such as `G05`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SatId {
    pub constellation: Constellation,
    pub prn: u8,
}

impl SatId {
    pub const fn new(constellation: Constellation, prn: u8) -> Self {
        Self { constellation, prn }
    }
}

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:02}", self.constellation.code(), self.prn)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid satellite id {0:?}")]
pub struct ParseSatIdError(pub String);

impl FromStr for SatId {
    type Err = ParseSatIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let err = || ParseSatIdError(s.to_string());
        let mut chars = s.chars();
        let c = chars.next().ok_or_else(err)?;
        let constellation = Constellation::from_code(c).ok_or_else(err)?;
        let rest = chars.as_str().trim();
        if rest.is_empty() || rest.len() > 3 || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let prn: u8 = rest.parse().map_err(|_| err())?;
        if prn == 0 {
            return Err(err());
        }
        Ok(SatId::new(constellation, prn))
    }
}

/// Two-character RINEX signal designator (band digit + attribute), e.g. `1C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignalCode(pub [u8; 2]);

impl SignalCode {
    pub fn band(&self) -> u8 {
        self.0[0]
    }
}

impl fmt::Display for SignalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.0[0] as char, self.0[1] as char)
    }
}

/// One tracked signal of one satellite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelId {
    pub sat: SatId,
    pub signal: SignalCode,
}

impl ChannelId {
    /// `None` when the band has no fixed CDMA wavelength.
    pub fn new(sat: SatId, signal: SignalCode) -> Option<Self> {
        sat.constellation.band_frequency(signal.band())?;
        Some(Self { sat, signal })
    }

    /// Carrier wavelength in meters.
    pub fn wavelength(&self) -> f64 {
        let f = self
            .sat
            .constellation
            .band_frequency(self.signal.band())
            .expect("ChannelId constructed with a known band");
        SPEED_OF_LIGHT / f
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} L{}", self.sat, self.signal)
    }
}

/// Carrier observation of one channel at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelObservation {
    /// Accumulated carrier phase (cycles).
    pub phase: Option<f64>,
    pub lock_lost: bool,
    /// Carrier-to-noise density (dB-Hz); diagnostics only.
    pub cn0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationEpoch {
    pub t: f64,
    pub channels: BTreeMap<ChannelId, ChannelObservation>,
}

impl ObservationEpoch {
    pub fn new(t: f64) -> Self {
        Self {
            t,
            channels: BTreeMap::new(),
        }
    }
}

/// N+1 contiguous carrier samples of one channel with the matching antenna
/// displacement. Phases are stored relative to the first sample so the
/// window arithmetic stays well inside f64 precision.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseWindow {
    pub channel: ChannelId,
    /// Index of the last epoch of the window in the source stream.
    pub end_epoch: usize,
    pub t: Vec<f64>,
    /// Phase relative to `phase_offset` (cycles).
    pub phase: Vec<f64>,
    pub phase_offset: f64,
    /// Noise scale (cycles).
    pub sigma: f64,
    pub los: UnitVector3,
    /// Antenna displacement at each carrier epoch (m, local frame).
    pub displacement: Vec<Vector3<f64>>,
}

impl PhaseWindow {
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }
}

/// Least-squares weights extrapolating a quadratic fitted to four equally
/// spaced samples one step ahead. Exact for any quadratic.
const QUAD_EXTRAPOLATION: [f64; 4] = [0.75, -1.25, -0.75, 2.25];

/// Epoch indices where the carrier is discontinuous.
///
/// An epoch is flagged when its lock-loss flag is set, or when the phase
/// departs from the prediction by more than `jump_threshold` cycles. The
/// prediction extrapolates a quadratic through the previous four
/// motion-compensated samples and adds back the antenna projection
/// `los·b/λ` at the current epoch, so displacement visible on the IMU is not
/// mistaken for a slip. After a flagged epoch the extrapolator restarts.
pub fn detect_cycle_slips(
    phase: &[f64],
    lock_lost: &[bool],
    displacement: &[Vector3<f64>],
    los: &UnitVector3,
    wavelength: f64,
    jump_threshold: f64,
) -> Vec<usize> {
    let n = phase.len().min(lock_lost.len()).min(displacement.len());
    let motion = |k: usize| los.dot(&displacement[k]) / wavelength;
    let mut slips = Vec::new();
    // first index of the current continuous arc
    let mut arc_start = 0;
    for k in 0..n {
        if lock_lost[k] || !phase[k].is_finite() {
            slips.push(k);
            arc_start = k + 1;
            continue;
        }
        if k < arc_start + 4 {
            continue;
        }
        // reference the history to phase[k-1] to keep magnitudes small
        let anchor = phase[k - 1] - motion(k - 1);
        let predicted: f64 = (0..4)
            .map(|i| QUAD_EXTRAPOLATION[i] * ((phase[k - 4 + i] - motion(k - 4 + i)) - anchor))
            .sum();
        let observed = (phase[k] - motion(k)) - anchor;
        if (observed - predicted).abs() > jump_threshold {
            slips.push(k);
            arc_start = k;
        }
    }
    slips
}

/// Parameters governing window acceptance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowRules {
    /// Window length N; the window holds N+1 samples.
    pub n: usize,
    /// Nominal carrier epoch spacing (s).
    pub nominal_spacing: f64,
    pub slip_threshold: f64,
    pub sigma_floor: f64,
}

/// Extracts the N+1 epochs of `channel` ending at `end_epoch`.
///
/// Displacement is linearly interpolated onto the carrier timestamps. Up to
/// four epochs preceding the window are used as history for slip screening.
pub fn extract_window(
    stream: &[ObservationEpoch],
    channel: ChannelId,
    end_epoch: usize,
    displacement: &DisplacementSeries,
    los: UnitVector3,
    rules: &WindowRules,
) -> Result<PhaseWindow, CarrierError> {
    let len = rules.n + 1;
    if len < 8 {
        return Err(CarrierError::WindowTooShort(len));
    }
    if end_epoch >= stream.len() || end_epoch + 1 < len {
        return Err(CarrierError::NotEnoughEpochs {
            end: end_epoch,
            needed: len,
            available: stream.len().min(end_epoch + 1),
        });
    }
    let start = end_epoch + 1 - len;

    // history epochs that connect to the window without gaps
    let mut hist_start = start;
    while hist_start > 0 && start - hist_start < 4 {
        let prev = &stream[hist_start - 1];
        let gap = stream[hist_start].t - prev.t;
        let usable = gap <= 1.5 * rules.nominal_spacing
            && prev
                .channels
                .get(&channel)
                .is_some_and(|o| o.phase.is_some());
        if !usable {
            break;
        }
        hist_start -= 1;
    }

    let mut t = Vec::with_capacity(end_epoch + 1 - hist_start);
    let mut phase = Vec::with_capacity(t.capacity());
    let mut lock = Vec::with_capacity(t.capacity());
    let mut disp = Vec::with_capacity(t.capacity());
    for (k, epoch) in stream[hist_start..=end_epoch].iter().enumerate() {
        let idx = hist_start + k;
        if idx > start {
            let gap = epoch.t - stream[idx - 1].t;
            if gap > 1.5 * rules.nominal_spacing {
                return Err(CarrierError::GapInWindow {
                    channel,
                    gap,
                    nominal: rules.nominal_spacing,
                });
            }
        }
        let obs = epoch.channels.get(&channel);
        let value = obs.and_then(|o| o.phase);
        let value = match value {
            Some(v) if v.is_finite() => v,
            _ => {
                return Err(CarrierError::ChannelMissing {
                    channel,
                    epoch: idx,
                })
            }
        };
        let b = displacement
            .interpolate(epoch.t)
            .ok_or(CarrierError::OutsideImuSpan { channel, t: epoch.t })?;
        t.push(epoch.t);
        phase.push(value);
        // a lock-loss at the first window epoch refers to the interval before it
        lock.push(idx > start && obs.is_some_and(|o| o.lock_lost));
        disp.push(b);
    }

    let slips = detect_cycle_slips(
        &phase,
        &lock,
        &disp,
        &los,
        channel.wavelength(),
        rules.slip_threshold,
    );
    let offset = start - hist_start;
    if let Some(&k) = slips.iter().find(|&&k| k > offset) {
        return Err(CarrierError::CycleSlipInWindow {
            channel,
            epoch: hist_start + k,
        });
    }

    let t = t.split_off(offset);
    let phase = phase.split_off(offset);
    let disp = disp.split_off(offset);
    // exact: all window phases lie within a factor of two of the first one
    let phase_offset = phase[0];
    let phase: Vec<f64> = phase.iter().map(|p| p - phase_offset).collect();
    let sigma = estimate_sigma(&phase, &disp, &los, channel.wavelength(), rules.sigma_floor)?;
    Ok(PhaseWindow {
        channel,
        end_epoch,
        t,
        phase,
        phase_offset,
        sigma,
        los,
        displacement: disp,
    })
}

/// Component of `phase` orthogonal to the quadratic span {1, i, i²/2}.
///
/// Computed from third differences, which cancel quadratics exactly in
/// floating point whenever the inputs are representable, followed by the
/// minimum-norm reconstruction `Dᵀ(DDᵀ)⁻¹(Dφ)`.
pub fn quadratic_complement(phase: &[f64]) -> DVector<f64> {
    let n = phase.len();
    assert!(n >= 4, "need at least four samples");
    let d1: Vec<f64> = phase.windows(2).map(|w| w[1] - w[0]).collect();
    let d2: Vec<f64> = d1.windows(2).map(|w| w[1] - w[0]).collect();
    let d3: Vec<f64> = d2.windows(2).map(|w| w[1] - w[0]).collect();
    let m = d3.len();
    // Dᵀ, (n × m): column r holds the stencil (-1, 3, -3, 1) at rows r..r+3
    let mut dt = DMatrix::<f64>::zeros(n, m);
    for r in 0..m {
        dt[(r, r)] = -1.0;
        dt[(r + 1, r)] = 3.0;
        dt[(r + 2, r)] = -3.0;
        dt[(r + 3, r)] = 1.0;
    }
    let qr = Householder::factor(&dt);
    // Dᵀ = Q₁R₁  ⇒  Dᵀ(DDᵀ)⁻¹d = Q₁ R₁⁻ᵀ d
    let r1 = qr.r_upper(m);
    let mut y = DVector::from_vec(d3);
    for i in 0..m {
        let mut s = y[i];
        for k in 0..i {
            s -= r1[(k, i)] * y[k];
        }
        y[i] = s / r1[(i, i)];
    }
    let mut full = DVector::<f64>::zeros(n);
    full.rows_mut(0, m).copy_from(&y);
    qr.apply_q(&mut full);
    full
}

/// Robust phase noise scale for one window (cycles).
///
/// Fits the full polynomial + motion model by least squares and returns
/// 1.4826 × the median absolute deviation of the residuals, floored at
/// `floor`.
pub fn estimate_sigma(
    phase: &[f64],
    displacement: &[Vector3<f64>],
    los: &UnitVector3,
    wavelength: f64,
    floor: f64,
) -> Result<f64, CarrierError> {
    // the line of sight does not enter the unconstrained fit: the motion
    // columns absorb any projection direction
    let _ = los;
    let n = phase.len();
    if n < 8 || displacement.len() != n {
        return Err(CarrierError::WindowTooShort(n));
    }
    let design = design_matrix(displacement, wavelength, 1.0);
    let rhs = quadratic_complement(phase);
    let residuals = robust_residuals(&design, &rhs);
    Ok((MAD_TO_SIGMA * median_absolute_deviation(&residuals)).max(floor))
}

/// Bisquare tuning constant (95% efficiency under Gaussian noise).
const BISQUARE_C: f64 = 4.685;
const ROBUST_ITERATIONS: usize = 10;

/// Residuals of an iteratively reweighted (Tukey bisquare) least-squares
/// fit; the first pass is ordinary least squares.
fn robust_residuals(design: &DMatrix<f64>, y: &DVector<f64>) -> Vec<f64> {
    let n = y.len();
    let mut weights = vec![1.0; n];
    let mut residuals = weighted_residuals(design, y, &weights);
    for _ in 0..ROBUST_ITERATIONS {
        let scale = MAD_TO_SIGMA * median_absolute_deviation(&residuals);
        if !(scale > 0.0) {
            break;
        }
        for (w, r) in weights.iter_mut().zip(&residuals) {
            let u = r / (BISQUARE_C * scale);
            *w = if u.abs() < 1.0 { (1.0 - u * u).powi(2) } else { 0.0 };
        }
        let next = weighted_residuals(design, y, &weights);
        let settled = next.iter().zip(&residuals).all(|(a, b)| (a - b).abs() <= 1e-12 * scale);
        residuals = next;
        if settled {
            break;
        }
    }
    residuals
}

/// `y − Dβ` for the weighted least-squares β; rank-deficient columns get β = 0.
fn weighted_residuals(design: &DMatrix<f64>, y: &DVector<f64>, weights: &[f64]) -> Vec<f64> {
    let cols = design.ncols();
    let mut a = design.clone();
    let mut z = y.clone();
    for (i, w) in weights.iter().enumerate() {
        let s = w.sqrt();
        a.row_mut(i).scale_mut(s);
        z[i] *= s;
    }
    let qr = Householder::factor(&a);
    qr.apply_qt(&mut z);
    let r = qr.r();
    let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    let mut beta = vec![0.0; cols];
    for i in (0..cols).rev() {
        let d = r[(i, i)];
        if d.abs() <= 1e-12 * diag_max {
            continue;
        }
        let acc: f64 = (i + 1..cols).map(|j| r[(i, j)] * beta[j]).sum();
        beta[i] = (z[i] - acc) / d;
    }
    (0..y.len())
        .map(|i| y[i] - (0..cols).map(|j| design[(i, j)] * beta[j]).sum::<f64>())
        .collect()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn median_absolute_deviation(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median(&mut dev)
}

/// Unscaled design matrix rows `[1, i, i²/2, bᵀ/λ]`, multiplied by `scale`.
fn design_matrix(displacement: &[Vector3<f64>], wavelength: f64, scale: f64) -> DMatrix<f64> {
    let n = displacement.len();
    DMatrix::from_fn(n, DESIGN_COLUMNS, |i, c| {
        let fi = i as f64;
        let v = match c {
            0 => 1.0,
            1 => fi,
            2 => 0.5 * fi * fi,
            _ => displacement[i][c - 3] / wavelength,
        };
        v * scale
    })
}

/// Noise-normalized design system of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSystem {
    pub channel: ChannelId,
    pub los: UnitVector3,
    /// (N+1)×6, rows `[1, i, i²/2, b_x/λ, b_y/λ, b_z/λ] / σ`.
    pub matrix: DMatrix<f64>,
    /// φ/σ.
    pub rhs: DVector<f64>,
    /// Part of φ/σ orthogonal to the polynomial columns; what the QR
    /// reduction consumes.
    pub highpass_rhs: DVector<f64>,
}

pub fn build_design_matrix(window: &PhaseWindow) -> DesignSystem {
    let inv_sigma = 1.0 / window.sigma;
    let matrix = design_matrix(&window.displacement, window.channel.wavelength(), inv_sigma);
    let rhs = DVector::from_iterator(window.len(), window.phase.iter().map(|p| p * inv_sigma));
    let highpass_rhs = quadratic_complement(&window.phase) * inv_sigma;
    DesignSystem {
        channel: window.channel,
        los: window.los,
        matrix,
        rhs,
        highpass_rhs,
    }
}
