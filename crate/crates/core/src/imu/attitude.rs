use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::{ImuError, ImuSample, STANDARD_GRAVITY};

/// Default gradient-descent gain of the attitude filter.
pub const DEFAULT_GAIN: f64 = 0.05;

/// Default convergence period of the attitude filter (s).
pub const DEFAULT_INIT_WINDOW: f64 = 2.0;

/// Gain multiplier applied while the filter is converging.
const INIT_GAIN_BOOST: f64 = 5.0;

/// Orientation of the body frame in the local east-north-up frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attitude {
    pub t: f64,
    /// Rotates body-frame vectors into the local frame.
    pub q: UnitQuaternion<f64>,
    /// Set during the initial convergence period.
    pub converging: bool,
}

// The gradient step runs in a north-west-up frame (magnetic north along +x),
// which is the frame the classic gradient formulation is written in.
fn nwu_to_enu() -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2)
}

/// Initial body→ENU orientation from mean specific force (and magnetic field).
fn initial_attitude(f: Vector3<f64>, m: Option<Vector3<f64>>) -> UnitQuaternion<f64> {
    let up = f.normalize();
    let east = m
        .map(|m| m.cross(&up))
        .filter(|e| e.norm() > 1e-6 * f.norm().max(1.0))
        .or_else(|| {
            // no heading reference: body x projected on the horizontal is east
            [Vector3::x(), Vector3::y()]
                .into_iter()
                .map(|a| a - up * up.dot(&a))
                .find(|e| e.norm() > 1e-3)
        })
        .unwrap()
        .normalize();
    let north = up.cross(&east);
    // rows: local axes expressed in the body frame
    let r = Matrix3::from_rows(&[east.transpose(), north.transpose(), up.transpose()]);
    UnitQuaternion::from_matrix(&r)
}

/// One normalized gradient step of the accelerometer/magnetometer objective.
fn gradient(q: &Quaternion<f64>, a: Vector3<f64>, m: Option<Vector3<f64>>) -> [f64; 4] {
    let (q0, q1, q2, q3) = (q.w, q.i, q.j, q.k);
    let fg = [
        2.0 * (q1 * q3 - q0 * q2) - a.x,
        2.0 * (q0 * q1 + q2 * q3) - a.y,
        2.0 * (0.5 - q1 * q1 - q2 * q2) - a.z,
    ];
    let jg = [
        [-2.0 * q2, 2.0 * q3, -2.0 * q0, 2.0 * q1],
        [2.0 * q1, 2.0 * q0, 2.0 * q3, 2.0 * q2],
        [0.0, -4.0 * q1, -4.0 * q2, 0.0],
    ];
    let mut s = [0.0; 4];
    for r in 0..3 {
        for c in 0..4 {
            s[c] += jg[r][c] * fg[r];
        }
    }
    if let Some(m) = m {
        // reference direction of the field in the earth frame
        let uq = UnitQuaternion::new_unchecked(*q);
        let h = uq * m;
        let bx = h.x.hypot(h.y);
        let bz = h.z;
        let fb = [
            2.0 * bx * (0.5 - q2 * q2 - q3 * q3) + 2.0 * bz * (q1 * q3 - q0 * q2) - m.x,
            2.0 * bx * (q1 * q2 - q0 * q3) + 2.0 * bz * (q0 * q1 + q2 * q3) - m.y,
            2.0 * bx * (q0 * q2 + q1 * q3) + 2.0 * bz * (0.5 - q1 * q1 - q2 * q2) - m.z,
        ];
        let jb = [
            [
                -2.0 * bz * q2,
                2.0 * bz * q3,
                -4.0 * bx * q2 - 2.0 * bz * q0,
                -4.0 * bx * q3 + 2.0 * bz * q1,
            ],
            [
                -2.0 * bx * q3 + 2.0 * bz * q1,
                2.0 * bx * q2 + 2.0 * bz * q0,
                2.0 * bx * q1 + 2.0 * bz * q3,
                -2.0 * bx * q0 + 2.0 * bz * q2,
            ],
            [
                2.0 * bx * q2,
                2.0 * bx * q3 - 4.0 * bz * q1,
                2.0 * bx * q0 - 4.0 * bz * q2,
                2.0 * bx * q1,
            ],
        ];
        for r in 0..3 {
            for c in 0..4 {
                s[c] += jb[r][c] * fb[r];
            }
        }
    }
    let n = s.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        s.iter_mut().for_each(|v| *v /= n);
    }
    s
}

/// Complementary gradient-descent attitude filter.
///
/// Gyro propagation is corrected at a fixed rate `gain` toward the
/// accelerometer gravity direction, and toward magnetic north when the
/// sample carries a magnetometer reading. The filter starts from the mean
/// specific force (and field) of the first `init_window` seconds and runs
/// with a boosted gain over that period, which is flagged as converging.
pub fn estimate_attitude(
    samples: &[ImuSample],
    gain: f64,
    init_window: f64,
) -> Result<Vec<Attitude>, ImuError> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(ImuError::ParameterError(format!("gain {gain} must be positive")));
    }
    if samples.len() < 2 {
        return Err(ImuError::InsufficientData("attitude needs at least two samples".into()));
    }
    let t0 = samples[0].t;
    let span = samples[samples.len() - 1].t - t0;
    if span < init_window {
        return Err(ImuError::InsufficientData(format!(
            "stream spans {span:.3} s, init window is {init_window:.3} s"
        )));
    }
    let rate = (samples.len() - 1) as f64 / span;
    if rate < 50.0 {
        return Err(ImuError::ParameterError(format!(
            "sample rate {rate:.1} Hz below 50 Hz"
        )));
    }

    let init: Vec<&ImuSample> = samples
        .iter()
        .take_while(|s| s.t - t0 <= init_window.max(0.0))
        .collect();
    let mean_f = init.iter().map(|s| s.specific_force).sum::<Vector3<f64>>() / init.len() as f64;
    let mags: Vec<Vector3<f64>> = init.iter().filter_map(|s| s.magnetic).collect();
    let mean_m = (mags.len() == init.len()).then(|| mags.iter().sum::<Vector3<f64>>() / mags.len() as f64);
    if mean_f.norm() < 1e-6 {
        return Err(ImuError::InsufficientData("no gravity reference in init window".into()));
    }

    let to_enu = nwu_to_enu();
    let mut q = (to_enu.inverse() * initial_attitude(mean_f, mean_m)).into_inner();
    let mut out = Vec::with_capacity(samples.len());
    let mut prev_t = t0;
    for s in samples {
        let dt = s.t - prev_t;
        prev_t = s.t;
        let converging = s.t - t0 < init_window;
        let beta = if converging { gain * INIT_GAIN_BOOST } else { gain };
        let w = s.angular_rate;
        let mut qdot = Quaternion::new(
            0.5 * (-q.i * w.x - q.j * w.y - q.k * w.z),
            0.5 * (q.w * w.x + q.j * w.z - q.k * w.y),
            0.5 * (q.w * w.y - q.i * w.z + q.k * w.x),
            0.5 * (q.w * w.z + q.i * w.y - q.j * w.x),
        );
        let fnorm = s.specific_force.norm();
        if fnorm > 0.0 {
            let a = s.specific_force / fnorm;
            let m = s.magnetic.filter(|m| m.norm() > 0.0).map(|m| m.normalize());
            let g = gradient(&q, a, m);
            qdot.w -= beta * g[0];
            qdot.i -= beta * g[1];
            qdot.j -= beta * g[2];
            qdot.k -= beta * g[3];
        }
        if dt > 0.0 {
            q += qdot * dt;
            q = q.normalize();
        }
        out.push(Attitude {
            t: s.t,
            q: to_enu * UnitQuaternion::new_unchecked(q),
            converging,
        });
    }
    Ok(out)
}

/// Gravity-free acceleration in the local frame: `R(q)·f − (0, 0, g)`.
pub fn linear_acceleration(
    samples: &[ImuSample],
    attitudes: &[Attitude],
) -> Result<Vec<Vector3<f64>>, ImuError> {
    if samples.len() != attitudes.len() {
        return Err(ImuError::AlignmentError(samples.len().min(attitudes.len())));
    }
    samples
        .iter()
        .zip(attitudes)
        .enumerate()
        .map(|(i, (s, a))| {
            if s.t != a.t {
                return Err(ImuError::AlignmentError(i));
            }
            Ok(a.q * s.specific_force - Vector3::new(0.0, 0.0, STANDARD_GRAVITY))
        })
        .collect()
}
