use std::ops::Range;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::{DisplacementSeries, ImuError};

/// Samples below this displacement norm (m) get a zero amplitude.
const MIN_DISPLACEMENT: f64 = 1e-6;

/// Minimum total displacement energy (m²) for a direction to exist.
const MIN_ENERGY: f64 = 1e-4 * 1e-4;

/// Dominant motion direction of a window and the signed amplitude of each sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSummary {
    pub direction: Vector3<f64>,
    pub amplitude: Vec<f64>,
}

pub fn motion_direction_amplitude(
    b: &DisplacementSeries,
    window: Range<usize>,
) -> Result<MotionSummary, ImuError> {
    let window = window.start.min(b.len())..window.end.min(b.len());
    let samples = &b.b[window];
    if samples.len() < 8 {
        return Err(ImuError::InsufficientData(format!(
            "{} displacement samples, need 8",
            samples.len()
        )));
    }
    let energy: f64 = samples.iter().map(|v| v.norm_squared()).sum();
    if energy < MIN_ENERGY {
        return Err(ImuError::NoMotion(energy));
    }
    let moment: Matrix3<f64> = samples.iter().map(|v| v * v.transpose()).sum();
    let eig = SymmetricEigen::new(moment);
    let dominant = eig.eigenvalues.imax();
    let mut direction = eig.eigenvectors.column(dominant).normalize();

    let proj: Vec<f64> = samples.iter().map(|v| v.dot(&direction)).collect();
    if first_extremum(&proj) < 0.0 {
        direction = -direction;
    }
    let amplitude = samples
        .iter()
        .map(|v| {
            let n = v.norm();
            if n < MIN_DISPLACEMENT {
                0.0
            } else {
                -v.dot(&direction).signum() * n
            }
        })
        .collect();
    Ok(MotionSummary {
        direction,
        amplitude,
    })
}

/// Value at the first interior local extremum, or the largest-magnitude value.
fn first_extremum(x: &[f64]) -> f64 {
    for k in 1..x.len().saturating_sub(1) {
        let (d0, d1) = (x[k] - x[k - 1], x[k + 1] - x[k]);
        if d0 * d1 < 0.0 && x[k] != 0.0 {
            return x[k];
        }
    }
    x.iter()
        .copied()
        .fold(0.0, |m, v| if v.abs() > m.abs() { v } else { m })
}

/// Largest L1 norm `|ax|+|ay|+|az|` in a slice; 0 for an empty slice.
pub fn max_l1_norm(a: &[Vector3<f64>]) -> f64 {
    a.iter().map(|v| v.abs().sum()).fold(0.0, f64::max)
}

/// True when the window's peak L1 acceleration reaches `threshold`.
pub fn acceleration_gate(a_lin: &[Vector3<f64>], window: Range<usize>, threshold: f64) -> bool {
    let window = window.start.min(a_lin.len())..window.end.min(a_lin.len());
    max_l1_norm(&a_lin[window]) >= threshold
}
