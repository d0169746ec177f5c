use nalgebra::Vector3;

use super::{uniform_rate, DisplacementSeries, ImuError};

/// Second-order IIR section, direct form II transposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    /// Denominator with a0 normalized to 1: `[a1, a2]`.
    pub a: [f64; 2],
}

impl Biquad {
    /// Second-order Butterworth high-pass via the prewarped bilinear transform.
    pub fn butterworth_high_pass(cutoff: f64, rate: f64) -> Self {
        let k = (std::f64::consts::PI * cutoff / rate).tan();
        let sqrt2 = std::f64::consts::SQRT_2;
        let norm = 1.0 / (1.0 + sqrt2 * k + k * k);
        Self {
            b: [norm, -2.0 * norm, norm],
            a: [2.0 * (k * k - 1.0) * norm, (1.0 - sqrt2 * k + k * k) * norm],
        }
    }

    /// State giving a steady-state response to a unit step.
    fn step_state(&self) -> [f64; 2] {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let dc = (b0 + b1 + b2) / (1.0 + a1 + a2);
        let z2 = b2 - a2 * dc;
        let z1 = b1 - a1 * dc + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64], state: [f64; 2]) {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let [mut z1, mut z2] = state;
        for v in x.iter_mut() {
            let input = *v;
            let y = b0 * input + z1;
            z1 = b1 * input - a1 * y + z2;
            z2 = b2 * input - a2 * y;
            *v = y;
        }
    }

    /// Zero-phase forward-backward filtering with odd-extension padding.
    pub fn filtfilt(&self, x: &[f64], padlen: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = padlen.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));

        let zi = self.step_state();
        let x0 = ext[0];
        self.run(&mut ext, [zi[0] * x0, zi[1] * x0]);
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, [zi[0] * y0, zi[1] * y0]);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

fn padlen(cutoff: f64, rate: f64) -> usize {
    (3.0 * rate / cutoff).ceil() as usize
}

fn check_cutoff(cutoff: f64, rate: f64, n: usize) -> Result<(), ImuError> {
    if !(cutoff > 0.0 && cutoff < rate / 4.0) {
        return Err(ImuError::ParameterError(format!(
            "cutoff {cutoff} Hz outside (0, {}) Hz",
            rate / 4.0
        )));
    }
    let needed = (4.0 / cutoff * rate).ceil() as usize;
    if n < needed {
        return Err(ImuError::InsufficientData(format!(
            "{n} samples, high-pass at {cutoff} Hz needs {needed}"
        )));
    }
    Ok(())
}

/// Zero-phase second-order Butterworth high-pass of a 3-vector stream.
pub fn high_pass(
    series: &[Vector3<f64>],
    rate: f64,
    cutoff: f64,
) -> Result<Vec<Vector3<f64>>, ImuError> {
    check_cutoff(cutoff, rate, series.len())?;
    let filter = Biquad::butterworth_high_pass(cutoff, rate);
    let pad = padlen(cutoff, rate);
    let axes: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            let x: Vec<f64> = series.iter().map(|v| v[c]).collect();
            filter.filtfilt(&x, pad)
        })
        .collect();
    Ok((0..series.len())
        .map(|i| Vector3::new(axes[0][i], axes[1][i], axes[2][i]))
        .collect())
}

fn trapezoid(x: &[Vector3<f64>], dt: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(x.len());
    let mut acc = Vector3::zeros();
    out.push(acc);
    for w in x.windows(2) {
        acc += (w[0] + w[1]) * (0.5 * dt);
        out.push(acc);
    }
    out
}

/// High-pass double integration of linear acceleration into displacement.
///
/// The acceleration itself is high-passed first so the stored `a_lin`
/// matches the band the displacement lives in; the velocity and the
/// displacement are each high-passed after trapezoidal integration.
pub fn integrate_displacement(
    t: &[f64],
    a_lin: &[Vector3<f64>],
    cutoff: f64,
) -> Result<DisplacementSeries, ImuError> {
    if t.len() != a_lin.len() {
        return Err(ImuError::AlignmentError(t.len().min(a_lin.len())));
    }
    let rate = uniform_rate(t)?;
    let dt = 1.0 / rate;
    let a = high_pass(a_lin, rate, cutoff)?;
    let v = high_pass(&trapezoid(a_lin, dt), rate, cutoff)?;
    let b = high_pass(&trapezoid(&v, dt), rate, cutoff)?;
    Ok(DisplacementSeries {
        t: t.to_vec(),
        b,
        v,
        a_lin: a,
    })
}
