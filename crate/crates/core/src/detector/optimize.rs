use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Vector3};
use thiserror::Error;

use super::reduce::QrArtifacts;
use crate::geo::UnitVector3;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100;

/// Tolerance of the secular-equation bisection on `‖r‖ − 1`.
const SECULAR_TOL: f64 = 1e-12;

/// Smallest `‖r̂ᵢ × r̂ⱼ‖` for two lines of sight to count as distinct.
const COLLINEAR_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("rotation not identifiable from {0} channel(s) with these lines of sight")]
    NotIdentifiable(usize),
}

/// Rotation between the displacement frame and the frame of the lines of sight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeEstimate {
    pub a: Rotation3<f64>,
    pub cost: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before the step fell below tolerance.
    pub converged: bool,
}

/// Spoofer line of sight minimizing the single-source cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpooferEstimate {
    pub r: UnitVector3,
    pub cost: f64,
}

/// `½ Σ ‖R3ʲ A r̂ʲ − z3ʲ‖²`.
pub fn attitude_cost(artifacts: &[QrArtifacts], a: &Rotation3<f64>) -> f64 {
    0.5 * artifacts
        .iter()
        .map(|art| (art.r3 * (a * art.los.as_vector()) - art.z3).norm_squared())
        .sum::<f64>()
}

/// `½ Σ ‖R3ʲ r − z3ʲ‖²`.
pub fn spoofer_cost(artifacts: &[QrArtifacts], r: &Vector3<f64>) -> f64 {
    0.5 * artifacts
        .iter()
        .map(|art| (art.r3 * r - art.z3).norm_squared())
        .sum::<f64>()
}

fn identifiable(artifacts: &[QrArtifacts]) -> bool {
    artifacts.iter().enumerate().any(|(i, a)| {
        artifacts[i + 1..]
            .iter()
            .any(|b| a.los.as_vector().cross(b.los.as_vector()).norm() > COLLINEAR_TOL)
    })
}

/// Orthogonal Procrustes fit of `A` with `A r̂ʲ ≈ R3ʲ⁻¹ z3ʲ`, or identity
/// when fewer than two channels have an invertible motion block.
fn procrustes_start(artifacts: &[QrArtifacts]) -> Rotation3<f64> {
    let mut h = Matrix3::zeros();
    let mut used = 0;
    for art in artifacts {
        if let Some(u) = art.motion_solution() {
            h += u * art.los.as_vector().transpose();
            used += 1;
        }
    }
    if used < 2 {
        return Rotation3::identity();
    }
    let svd = h.svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u, svd.v_t) else {
        return Rotation3::identity();
    };
    let d = (u * v_t).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    Rotation3::from_matrix_unchecked(u * fix * v_t)
}

/// The 24 proper rotations of the cube.
fn cube_rotations() -> Vec<Rotation3<f64>> {
    let axes = [Vector3::x(), -Vector3::x(), Vector3::y(), -Vector3::y(), Vector3::z(), -Vector3::z()];
    let mut out = Vec::with_capacity(24);
    for &c0 in &axes {
        for &c1 in &axes {
            if c0.dot(&c1) != 0.0 {
                continue;
            }
            let m = Matrix3::from_columns(&[c0, c1, c0.cross(&c1)]);
            out.push(Rotation3::from_matrix_unchecked(m));
        }
    }
    out
}

/// Newton descent on `A ← A exp([ω]×)` with step halving.
///
/// The Hessian is the Gauss-Newton term `JᵀJ` plus the residual curvature
/// of the rotation map, shifted to positive definite when needed; plain
/// Gauss-Newton converges only linearly once residuals are large, which is
/// exactly the case of a spoofed window.
fn newton_descent(
    artifacts: &[QrArtifacts],
    start: Rotation3<f64>,
    tol: f64,
    max_iter: usize,
) -> AttitudeEstimate {
    let mut a = start;
    let mut cost = attitude_cost(artifacts, &a);
    for it in 0..max_iter {
        let mut hess = Matrix3::zeros();
        let mut grad = Vector3::zeros();
        for art in artifacts {
            let r = art.los.as_vector();
            let ra = art.r3 * a.matrix();
            let e = ra * r - art.z3;
            let jac = -(ra * r.cross_matrix());
            let g = ra.transpose() * e;
            hess += jac.transpose() * jac;
            hess += 0.5 * (g * r.transpose() + r * g.transpose()) - Matrix3::identity() * g.dot(r);
            grad += jac.transpose() * e;
        }
        let Some(step) = damped_newton_step(&hess, &grad) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = a * Rotation3::new(step * scale);
            let c = attitude_cost(artifacts, &candidate);
            if c <= cost {
                accepted = Some((candidate, c));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, c)) = accepted else {
            // no descent along the Newton direction: stationary
            return AttitudeEstimate { a, cost, iterations: it, converged: true };
        };
        a = renormalize(next);
        cost = c;
        if (step * scale).norm() < tol {
            return AttitudeEstimate { a, cost, iterations: it + 1, converged: true };
        }
    }
    AttitudeEstimate { a, cost, iterations: max_iter, converged: false }
}

/// Solves `(H + τI) δ = −g` with the smallest shift `τ ≥ 0` keeping the
/// system safely positive definite.
fn damped_newton_step(hess: &Matrix3<f64>, grad: &Vector3<f64>) -> Option<Vector3<f64>> {
    let sym = 0.5 * (hess + hess.transpose());
    let eig = SymmetricEigen::new(sym);
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let floor = 1e-10 * scale;
    let min = eig.eigenvalues.min();
    let shift = if min < floor { floor - min } else { 0.0 };
    let mut step = Vector3::zeros();
    for i in 0..3 {
        let v = eig.eigenvectors.column(i);
        step -= v * (v.dot(grad) / (eig.eigenvalues[i] + shift));
    }
    step.iter().all(|x| x.is_finite()).then_some(step)
}

fn renormalize(r: Rotation3<f64>) -> Rotation3<f64> {
    let mut r = r;
    r.renormalize();
    r
}

/// Minimizes `½ Σ ‖R3ʲ A r̂ʲ − z3ʲ‖²` over rotations `A`.
///
/// Newton descent runs from the Procrustes warm start and from each of the 24
/// cube rotations; the lowest-cost result is kept.
pub fn optimize_attitude(
    artifacts: &[QrArtifacts],
    tol: f64,
    max_iter: usize,
) -> Result<AttitudeEstimate, OptimizeError> {
    if artifacts.len() < 2 || !identifiable(artifacts) {
        return Err(OptimizeError::NotIdentifiable(artifacts.len()));
    }
    let mut best = newton_descent(artifacts, procrustes_start(artifacts), tol, max_iter);
    for start in cube_rotations() {
        let candidate = newton_descent(artifacts, start, tol, max_iter);
        if candidate.cost < best.cost {
            best = candidate;
        }
    }
    Ok(best)
}

/// Minimizes `½ Σ ‖R3ʲ r − z3ʲ‖²` over unit vectors `r`.
///
/// With `M = Σ R3ʲᵀR3ʲ` and `c = Σ R3ʲᵀz3ʲ` the minimizer solves
/// `(M + μI) r = c` for the unique `μ ≥ −λ_min(M)` with `‖r‖ = 1`; when
/// `c` has no component along the smallest eigenvector and the remaining
/// components cannot reach unit norm, the deficit is filled along that
/// eigenvector.
pub fn optimize_spoofer_los(artifacts: &[QrArtifacts]) -> SpooferEstimate {
    let mut m = Matrix3::zeros();
    let mut c = Vector3::zeros();
    for art in artifacts {
        m += art.r3.transpose() * art.r3;
        c += art.r3.transpose() * art.z3;
    }
    let r = sphere_constrained_minimizer(&m, &c);
    let r = UnitVector3::new_normalize(r).unwrap_or_else(|| UnitVector3::new_normalize(Vector3::z()).unwrap());
    SpooferEstimate {
        cost: spoofer_cost(artifacts, r.as_vector()),
        r,
    }
}

/// Global minimizer of `½ rᵀMr − cᵀr` on the unit sphere, `M` symmetric PSD.
pub fn sphere_constrained_minimizer(m: &Matrix3<f64>, c: &Vector3<f64>) -> Vector3<f64> {
    let eig = SymmetricEigen::new(*m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lambda: [f64; 3] = order.map(|i| eig.eigenvalues[i]);
    let vecs: [Vector3<f64>; 3] = order.map(|i| eig.eigenvectors.column(i).into_owned());
    let cp: [f64; 3] = vecs.map(|v| v.dot(c));

    let scale = lambda[2].abs().max(c.norm()).max(f64::MIN_POSITIVE);
    let lmin = lambda[0];
    // eigenvalues tied with the smallest one
    let tied = |i: usize| lambda[i] - lmin <= 1e-12 * scale;
    let c_min_sq: f64 = (0..3).filter(|&i| tied(i)).map(|i| cp[i] * cp[i]).sum();

    let norm_sq = |mu: f64| -> f64 { (0..3).map(|i| (cp[i] / (lambda[i] + mu)).powi(2)).sum() };
    let build = |mu: f64| -> Vector3<f64> { (0..3).map(|i| vecs[i] * (cp[i] / (lambda[i] + mu))).sum() };

    if c_min_sq <= (1e-14 * scale).powi(2) {
        // candidate hard case: μ = −λ_min with the free component along the null direction
        let partial: Vector3<f64> = (0..3)
            .filter(|&i| !tied(i))
            .map(|i| vecs[i] * (cp[i] / (lambda[i] - lmin)))
            .sum();
        let deficit = 1.0 - partial.norm_squared();
        if deficit >= 0.0 {
            let null = (0..3).find(|&i| tied(i)).map(|i| vecs[i]).unwrap_or_else(Vector3::z);
            return partial + null * deficit.sqrt();
        }
    }

    // ‖r(μ)‖ decreases monotonically on (−λ_min, ∞)
    let mut lo = -lmin;
    let mut hi = -lmin + c.norm().max(f64::MIN_POSITIVE);
    while norm_sq(hi) > 1.0 {
        hi = -lmin + 2.0 * (hi + lmin);
    }
    let mut mu = hi;
    for _ in 0..400 {
        mu = 0.5 * (lo + hi);
        if mu <= lo || mu >= hi {
            break;
        }
        let n = norm_sq(mu).sqrt();
        if (n - 1.0).abs() <= SECULAR_TOL {
            break;
        }
        if n > 1.0 {
            lo = mu;
        } else {
            hi = mu;
        }
    }
    let r = build(mu);
    if r.iter().all(|v| v.is_finite()) && r.norm() > 0.0 {
        r.normalize()
    } else {
        vecs[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier::{ChannelId, Constellation, SatId, SignalCode};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn artifact(r3: Matrix3<f64>, z3: Vector3<f64>, los: Vector3<f64>, prn: u8) -> QrArtifacts {
        QrArtifacts {
            channel: ChannelId::new(SatId::new(Constellation::Gps, prn), SignalCode(*b"1C")).unwrap(),
            r3,
            z3,
            residual_tail_energy: 0.0,
            los: UnitVector3::new_normalize(los).unwrap(),
            motion_rank_ok: true,
        }
    }

    fn random_upper(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| {
            if j < i {
                0.0
            } else if i == j {
                rng.random_range(5.0..30.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        loop {
            let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 0.1 && n <= 1.0 {
                return v / n;
            }
        }
    }

    fn geodesic(a: &Rotation3<f64>, b: &Rotation3<f64>) -> f64 {
        let q = nalgebra::UnitQuaternion::from_rotation_matrix(&(a.inverse() * b));
        2.0 * q.imag().norm().atan2(q.w.abs())
    }

    fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation3<f64> {
        Rotation3::new(random_unit(rng) * rng.random_range(0.0..std::f64::consts::PI))
    }

    #[test]
    fn identity_fixed_point() {
        let arts: Vec<_> = [Vector3::x(), Vector3::y(), Vector3::new(1.0, 1.0, 1.0).normalize()]
            .iter()
            .enumerate()
            .map(|(i, &r)| artifact(Matrix3::identity(), r, r, i as u8 + 1))
            .collect();
        let est = optimize_attitude(&arts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!(geodesic(&est.a, &Rotation3::identity()) < 1e-12);
        assert!(est.cost < 1e-24);
    }

    #[test]
    fn recovers_random_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let truth = random_rotation(&mut rng);
            let arts: Vec<_> = (0..6)
                .map(|j| {
                    let r3 = random_upper(&mut rng);
                    let los = random_unit(&mut rng);
                    artifact(r3, r3 * (truth * los), los, j + 1)
                })
                .collect();
            let est = optimize_attitude(&arts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            assert!(geodesic(&est.a, &truth) <= 1e-6, "{}", geodesic(&est.a, &truth));
            assert!(est.cost <= 1e-12);
        }
    }

    #[test]
    fn single_or_collinear_channels_not_identifiable() {
        let one = vec![artifact(Matrix3::identity(), Vector3::x(), Vector3::x(), 1)];
        assert_eq!(optimize_attitude(&one, DEFAULT_TOL, 10), Err(OptimizeError::NotIdentifiable(1)));
        let two = vec![
            artifact(Matrix3::identity(), Vector3::x(), Vector3::x(), 1),
            artifact(Matrix3::identity(), Vector3::x(), -Vector3::x(), 2),
        ];
        assert!(optimize_attitude(&two, DEFAULT_TOL, 10).is_err());
    }

    #[test]
    fn result_is_a_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let arts: Vec<_> = (0..5)
            .map(|j| {
                let z = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                artifact(random_upper(&mut rng), z, random_unit(&mut rng), j + 1)
            })
            .collect();
        let a = optimize_attitude(&arts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().a;
        let m = a.matrix();
        assert!((m.transpose() * m - Matrix3::identity()).norm() <= 1e-9);
        assert!((m.determinant() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn spoofer_closed_form() {
        let r = sphere_constrained_minimizer(&Matrix3::identity(), &Vector3::new(2.0, 0.0, 0.0));
        assert!((r - Vector3::x()).norm() < 1e-12);
        // single channel R3 = I, z3 = (2,0,0): J = ½(2−1)² = 0.5
        let art = artifact(Matrix3::identity(), Vector3::new(2.0, 0.0, 0.0), Vector3::y(), 1);
        let est = optimize_spoofer_los(&[art]);
        assert!((est.cost - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spoofer_consistent_source() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let u = random_unit(&mut rng);
        let arts: Vec<_> = (0..8)
            .map(|j| {
                let r3 = random_upper(&mut rng);
                artifact(r3, r3 * u, random_unit(&mut rng), j + 1)
            })
            .collect();
        let est = optimize_spoofer_los(&arts);
        assert!((est.r.as_vector() - u).norm() < 1e-9);
        assert!(est.cost <= 1e-12);
    }

    #[test]
    fn spoofer_hard_case() {
        // c orthogonal to the smallest eigenvector and too small to reach the sphere
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 4.0, 9.0));
        let c = Vector3::new(0.0, 1.0, 0.0);
        let r = sphere_constrained_minimizer(&m, &c);
        assert!((r.norm() - 1.0).abs() < 1e-12);
        // μ = −1: r = (±√(1−1/9), 1/3, 0)
        assert!((r.y - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.x.abs() - (8.0f64 / 9.0).sqrt()).abs() < 1e-12);
    }

    fn sphere_objective(m: &Matrix3<f64>, c: &Vector3<f64>, r: &Vector3<f64>) -> f64 {
        0.5 * r.dot(&(m * r)) - c.dot(r)
    }

    proptest! {
        #[test]
        fn sphere_minimizer_beats_samples(
            seed in any::<u64>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b = Matrix3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let m = b.transpose() * b;
            let c = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let r = sphere_constrained_minimizer(&m, &c);
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
            let best = sphere_objective(&m, &c, &r);
            for _ in 0..2000 {
                let s = random_unit(&mut rng);
                prop_assert!(best <= sphere_objective(&m, &c, &s) + 1e-9);
            }
        }

        #[test]
        fn costs_are_nonnegative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let arts: Vec<_> = (0..4)
                .map(|j| {
                    let z = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                    artifact(random_upper(&mut rng), z, random_unit(&mut rng), j + 1)
                })
                .collect();
            let a = optimize_attitude(&arts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
            let s = optimize_spoofer_los(&arts);
            prop_assert!(a.cost >= 0.0 && s.cost >= 0.0);
        }

        #[test]
        fn global_frame_invariance(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let q = random_rotation(&mut rng);
            let arts: Vec<_> = (0..5)
                .map(|j| {
                    let z = Vector3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                    artifact(random_upper(&mut rng), z, random_unit(&mut rng), j + 1)
                })
                .collect();
            let rotated: Vec<_> = arts
                .iter()
                .map(|a| QrArtifacts { los: UnitVector3::new_normalize(q * a.los.as_vector()).unwrap(), ..a.clone() })
                .collect();
            let j0 = optimize_attitude(&arts, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().cost;
            let j1 = optimize_attitude(&rotated, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap().cost;
            prop_assert!((j0 - j1).abs() <= 1e-9 * j0.max(1.0), "{} vs {}", j0, j1);
        }
    }
}
