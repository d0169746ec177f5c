use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::carrier::{ChannelId, DesignSystem, DESIGN_COLUMNS};
use crate::geo::UnitVector3;
use crate::qr::Householder;

/// Smallest singular value of `R3` below which the motion is treated as
/// lacking three-dimensional excitation.
pub const RANK_TOLERANCE: f64 = 1e-8;

/// Motion block of the QR-reduced window system of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct QrArtifacts {
    pub channel: ChannelId,
    /// Upper-triangular block of `R` on the motion columns.
    pub r3: Matrix3<f64>,
    /// Rotated, noise-normalized phase on the motion rows.
    pub z3: Vector3<f64>,
    /// Energy of the rotated phase beyond the model rows.
    pub residual_tail_energy: f64,
    pub los: UnitVector3,
    /// False when `R3` is numerically singular.
    pub motion_rank_ok: bool,
}

impl QrArtifacts {
    /// `R3⁻¹ z3` when `R3` is well conditioned.
    pub fn motion_solution(&self) -> Option<Vector3<f64>> {
        if !self.motion_rank_ok {
            return None;
        }
        self.r3.solve_upper_triangular(&self.z3)
    }
}

/// QR-reduces one design system.
///
/// The polynomial-free right-hand side is used; the motion rows of `Qᵀ`
/// are orthogonal to the polynomial columns, so the motion block is the
/// same as for the raw phase while staying exactly invariant to added
/// quadratics.
pub fn qr_reduce(system: &DesignSystem) -> QrArtifacts {
    let (r3, z3, residual_tail_energy) = reduce_parts(&system.matrix, &system.highpass_rhs);
    QrArtifacts {
        channel: system.channel,
        r3,
        z3,
        residual_tail_energy,
        los: system.los,
        motion_rank_ok: smallest_singular_value(&r3) >= RANK_TOLERANCE,
    }
}

/// Householder reduction of an (N+1)×6 system to its motion block:
/// `(R3, z3, Σ z[6..]²)`.
pub fn reduce_parts(matrix: &DMatrix<f64>, rhs: &DVector<f64>) -> (Matrix3<f64>, Vector3<f64>, f64) {
    assert_eq!(matrix.ncols(), DESIGN_COLUMNS, "design matrix must have six columns");
    assert_eq!(matrix.nrows(), rhs.len(), "design rows and rhs length differ");
    assert!(matrix.nrows() >= DESIGN_COLUMNS, "design matrix must be tall");
    let qr = Householder::factor(matrix);
    let mut z = rhs.clone();
    qr.apply_qt(&mut z);
    let r = qr.r();
    let r3 = Matrix3::from_fn(|i, j| if j >= i { r[(3 + i, 3 + j)] } else { 0.0 });
    let z3 = Vector3::new(z[3], z[4], z[5]);
    let tail = z.rows_range(DESIGN_COLUMNS..).norm_squared();
    (r3, z3, tail)
}

pub(crate) fn smallest_singular_value(m: &Matrix3<f64>) -> f64 {
    m.singular_values().min()
}
