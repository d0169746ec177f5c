//! Earth frames, satellite position tables and line-of-sight geometry.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::carrier::SatId;

/// WGS-84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// Minimum receiver/transmitter separation accepted by [`los_unit_vector`].
const MIN_LOS_RANGE_M: f64 = 1.0;

/// Orbit-class radius bounds used when validating ingested satellite tables.
pub const ORBIT_RADIUS_RANGE_M: (f64, f64) = (2.0e7, 3.5e7);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("degenerate geometry: transmitter within {MIN_LOS_RANGE_M} m of receiver")]
    DegenerateGeometry,
    #[error("time {t} s outside table span [{first}, {last}] for {sat}")]
    OutOfRange {
        sat: SatId,
        t: f64,
        first: f64,
        last: f64,
    },
    #[error("satellite {0} not present in position table")]
    UnknownSatellite(SatId),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("satellite {sat}: timestamps must be strictly increasing (at t = {t} s)")]
    NonMonotonic { sat: SatId, t: f64 },
    #[error("satellite {sat}: radius {radius} m outside orbit-class range")]
    NotOrbitClass { sat: SatId, radius: f64 },
}

/// Earth-centered Earth-fixed position in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcefPosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn from_vector(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }
}

/// Direction with unit Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3(Vector3<f64>);

impl UnitVector3 {
    /// Normalizes `v`; returns `None` for zero or non-finite input.
    pub fn new_normalize(v: Vector3<f64>) -> Option<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        let mut u = v / n;
        // one Newton step on the norm brings |‖u‖ − 1| down to ~1 ulp
        let n2 = u.norm();
        u /= n2;
        Some(Self(u))
    }

    pub fn into_inner(self) -> Vector3<f64> {
        self.0
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn dot(&self, v: &Vector3<f64>) -> f64 {
        self.0.dot(v)
    }
}

/// Unit vector pointing from `receiver` to `transmitter`.
pub fn los_unit_vector(
    receiver: EcefPosition,
    transmitter: EcefPosition,
) -> Result<UnitVector3, GeoError> {
    if !receiver.is_finite() || !transmitter.is_finite() {
        return Err(GeoError::NonFinite);
    }
    let d = transmitter.to_vector() - receiver.to_vector();
    if d.norm() <= MIN_LOS_RANGE_M {
        return Err(GeoError::DegenerateGeometry);
    }
    UnitVector3::new_normalize(d).ok_or(GeoError::DegenerateGeometry)
}

/// Geodetic latitude/longitude (radians) and height (m) on WGS-84.
pub fn ecef_to_geodetic(p: EcefPosition) -> (f64, f64, f64) {
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let b = WGS84_A * (1.0 - WGS84_F);
    let horiz = p.x.hypot(p.y);
    let lon = p.y.atan2(p.x);
    if horiz < 1e-9 {
        let lat = if p.z >= 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        return (lat, lon, p.z.abs() - b);
    }
    let mut lat = p.z.atan2(horiz * (1.0 - e2));
    let mut h = 0.0;
    for _ in 0..10 {
        let s = lat.sin();
        let n = WGS84_A / (1.0 - e2 * s * s).sqrt();
        h = horiz / lat.cos() - n;
        let next = p.z.atan2(horiz * (1.0 - e2 * n / (n + h)));
        let done = (next - lat).abs() < 1e-15;
        lat = next;
        if done {
            break;
        }
    }
    (lat, lon, h)
}

/// ECEF position of geodetic latitude/longitude (radians) and height (m).
pub fn geodetic_to_ecef(lat: f64, lon: f64, h: f64) -> EcefPosition {
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    let n = WGS84_A / (1.0 - e2 * sl * sl).sqrt();
    EcefPosition::new((n + h) * cl * co, (n + h) * cl * so, (n * (1.0 - e2) + h) * sl)
}

/// Rotation taking ECEF difference vectors into east-north-up at `reference`.
pub fn enu_rotation(reference: EcefPosition) -> Matrix3<f64> {
    let (lat, lon, _) = ecef_to_geodetic(reference);
    let (sl, cl) = lat.sin_cos();
    let (so, co) = lon.sin_cos();
    Matrix3::new(
        -so,
        co,
        0.0,
        -sl * co,
        -sl * so,
        cl,
        cl * co,
        cl * so,
        sl,
    )
}

/// East-north-up components of `v − reference`.
pub fn ecef_to_local(
    reference: EcefPosition,
    v: EcefPosition,
) -> Result<Vector3<f64>, GeoError> {
    if !reference.is_finite() || !v.is_finite() {
        return Err(GeoError::NonFinite);
    }
    if reference.norm() < 1.0 {
        return Err(GeoError::DegenerateGeometry);
    }
    Ok(enu_rotation(reference) * (v.to_vector() - reference.to_vector()))
}

/// Elevation angle (radians) of `target` seen from `receiver`.
pub fn elevation(receiver: EcefPosition, target: EcefPosition) -> Result<f64, GeoError> {
    let enu = ecef_to_local(receiver, target)?;
    Ok(enu.z.atan2(enu.x.hypot(enu.y)))
}

/// Per-satellite time-tagged ECEF positions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SatPositionTable {
    entries: BTreeMap<SatId, Vec<(f64, EcefPosition)>>,
}

impl SatPositionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a knot; times must increase per satellite.
    pub fn push(&mut self, sat: SatId, t: f64, pos: EcefPosition) -> Result<(), GeoError> {
        if !t.is_finite() || !pos.is_finite() {
            return Err(GeoError::NonFinite);
        }
        let list = self.entries.entry(sat).or_default();
        if let Some(&(last, _)) = list.last() {
            if t <= last {
                return Err(GeoError::NonMonotonic { sat, t });
            }
        }
        list.push((t, pos));
        Ok(())
    }

    pub fn satellites(&self) -> impl Iterator<Item = &SatId> {
        self.entries.keys()
    }

    pub fn knots(&self, sat: &SatId) -> Option<&[(f64, EcefPosition)]> {
        self.entries.get(sat).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that every knot radius is orbit-class.
    pub fn validate_orbit_class(&self) -> Result<(), GeoError> {
        for (sat, knots) in &self.entries {
            for (_, p) in knots {
                let r = p.norm();
                if !(ORBIT_RADIUS_RANGE_M.0..ORBIT_RADIUS_RANGE_M.1).contains(&r) {
                    return Err(GeoError::NotOrbitClass { sat: *sat, radius: r });
                }
            }
        }
        Ok(())
    }

    pub fn interpolate(&self, sat: &SatId, t: f64) -> Result<EcefPosition, GeoError> {
        interpolate_sat_position(self, sat, t)
    }
}

/// Piecewise-linear satellite position at `t`.
pub fn interpolate_sat_position(
    table: &SatPositionTable,
    sat: &SatId,
    t: f64,
) -> Result<EcefPosition, GeoError> {
    let knots = table
        .entries
        .get(sat)
        .filter(|k| !k.is_empty())
        .ok_or(GeoError::UnknownSatellite(*sat))?;
    let first = knots[0].0;
    let last = knots[knots.len() - 1].0;
    if !(t >= first && t <= last) {
        return Err(GeoError::OutOfRange {
            sat: *sat,
            t,
            first,
            last,
        });
    }
    // first knot with time >= t
    let hi = knots.partition_point(|&(tk, _)| tk < t);
    let (t1, p1) = knots[hi];
    if t1 == t || hi == 0 {
        return Ok(p1);
    }
    let (t0, p0) = knots[hi - 1];
    let w = (t - t0) / (t1 - t0);
    let a = p0.to_vector();
    let b = p1.to_vector();
    Ok(EcefPosition::from_vector(a + (b - a) * w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carrier::Constellation;
    use proptest::prelude::*;

    fn g(prn: u8) -> SatId {
        SatId::new(Constellation::Gps, prn)
    }

    #[test]
    fn los_axis_aligned() {
        let u = los_unit_vector(
            EcefPosition::new(0.0, 0.0, 0.0),
            EcefPosition::new(2.02e7, 0.0, 0.0),
        )
        .unwrap();
        assert_eq!(u.into_inner(), Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn los_three_four_five() {
        let u = los_unit_vector(
            EcefPosition::new(0.0, 0.0, 0.0),
            EcefPosition::new(3e6, 4e6, 0.0),
        )
        .unwrap();
        assert!((u.into_inner() - Vector3::new(0.6, 0.8, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn los_coincident_is_degenerate() {
        let p = EcefPosition::new(1.0, 2.0, 3.0);
        assert_eq!(los_unit_vector(p, p), Err(GeoError::DegenerateGeometry));
        let q = EcefPosition::new(1.5, 2.0, 3.0);
        assert_eq!(los_unit_vector(p, q), Err(GeoError::DegenerateGeometry));
    }

    fn line_table() -> SatPositionTable {
        let mut t = SatPositionTable::new();
        t.push(g(5), 0.0, EcefPosition::new(0.0, 0.0, 0.0)).unwrap();
        t.push(g(5), 10.0, EcefPosition::new(10.0, 0.0, 0.0)).unwrap();
        t
    }

    #[test]
    fn interpolation_midpoint_and_knots() {
        let t = line_table();
        assert_eq!(
            interpolate_sat_position(&t, &g(5), 5.0).unwrap(),
            EcefPosition::new(5.0, 0.0, 0.0)
        );
        assert_eq!(
            interpolate_sat_position(&t, &g(5), 10.0).unwrap(),
            EcefPosition::new(10.0, 0.0, 0.0)
        );
        assert_eq!(
            interpolate_sat_position(&t, &g(5), 0.0).unwrap(),
            EcefPosition::new(0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn interpolation_errors() {
        let t = line_table();
        assert!(matches!(
            interpolate_sat_position(&t, &g(5), -1.0),
            Err(GeoError::OutOfRange { .. })
        ));
        assert_eq!(
            interpolate_sat_position(&t, &g(7), 1.0),
            Err(GeoError::UnknownSatellite(g(7)))
        );
    }

    #[test]
    fn table_rejects_non_monotonic() {
        let mut t = line_table();
        assert!(matches!(
            t.push(g(5), 10.0, EcefPosition::new(0.0, 0.0, 0.0)),
            Err(GeoError::NonMonotonic { .. })
        ));
    }

    #[test]
    fn enu_equator_prime_meridian() {
        let r = EcefPosition::new(WGS84_A, 0.0, 0.0);
        let v = EcefPosition::new(WGS84_A, 0.0, 1.0);
        let enu = ecef_to_local(r, v).unwrap();
        assert!((enu - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
        assert_eq!(ecef_to_local(r, r).unwrap(), Vector3::zeros());
    }

    #[test]
    fn enu_north_pole_textbook_rotation() {
        // Hand evaluation of the textbook matrix at lat = 90°, lon = 0:
        // e = (-sin lon, cos lon, 0) = (0, 1, 0)
        // n = (-sin lat cos lon, -sin lat sin lon, cos lat) = (-1, 0, 0)
        // u = (0, 0, 1)
        // so an ECEF +x step is 1 m towards the south, with no east component.
        let b = WGS84_A * (1.0 - WGS84_F);
        let r = EcefPosition::new(0.0, 0.0, b);
        let v = EcefPosition::new(1.0, 0.0, b);
        let enu = ecef_to_local(r, v).unwrap();
        assert!((enu - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12, "{enu}");
        let v = EcefPosition::new(0.0, 1.0, b);
        let enu = ecef_to_local(r, v).unwrap();
        assert!((enu - Vector3::new(1.0, 0.0, 0.0)).norm() < 1e-12, "{enu}");
    }

    #[test]
    fn geodetic_round_numbers() {
        // point 1000 m above the ellipsoid at 45°N 10°E
        let lat = 45f64.to_radians();
        let lon = 10f64.to_radians();
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let n = WGS84_A / (1.0 - e2 * lat.sin().powi(2)).sqrt();
        let h = 1000.0;
        let p = EcefPosition::new(
            (n + h) * lat.cos() * lon.cos(),
            (n + h) * lat.cos() * lon.sin(),
            (n * (1.0 - e2) + h) * lat.sin(),
        );
        let (la, lo, hh) = ecef_to_geodetic(p);
        assert!((la - lat).abs() < 1e-12);
        assert!((lo - lon).abs() < 1e-12);
        assert!((hh - h).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn geodetic_ecef_round_trip(lat in -1.55f64..1.55, lon in -3.1f64..3.1, h in -500.0f64..1e5) {
            let (la, lo, hh) = ecef_to_geodetic(geodetic_to_ecef(lat, lon, h));
            prop_assert!((la - lat).abs() < 1e-11);
            prop_assert!((lo - lon).abs() < 1e-11);
            prop_assert!((hh - h).abs() < 1e-5);
        }
    }

    #[test]
    fn meo_los_change_over_one_second_is_small() {
        // GPS-like orbit: radius 26 560 km, speed 3.87 km/s
        let rx = EcefPosition::new(WGS84_A, 0.0, 0.0);
        let r0 = Vector3::new(1.5e7, 1.2e7, 1.8e7);
        let radius = 2.656e7;
        let p0 = r0.normalize() * radius;
        let vel = p0.cross(&Vector3::z()).normalize() * 3870.0;
        let p1 = p0 + vel;
        let u0 = los_unit_vector(rx, EcefPosition::from_vector(p0)).unwrap();
        let u1 = los_unit_vector(rx, EcefPosition::from_vector(p1)).unwrap();
        assert!((u0.into_inner() - u1.into_inner()).norm() < 1e-3);
    }

    proptest! {
        #[test]
        fn los_is_unit(
            rx in prop::array::uniform3(-7.0e6f64..7.0e6),
            tx in prop::array::uniform3(-3.0e7f64..3.0e7),
        ) {
            let r = EcefPosition::new(rx[0], rx[1], rx[2]);
            let t = EcefPosition::new(tx[0], tx[1], tx[2]);
            if let Ok(u) = los_unit_vector(r, t) {
                prop_assert!((u.into_inner().norm() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn enu_preserves_norm(
            lat in -1.5f64..1.5, lon in -3.1f64..3.1,
            d in prop::array::uniform3(-1.0e4f64..1.0e4),
        ) {
            let reference = EcefPosition::new(
                WGS84_A * lat.cos() * lon.cos(),
                WGS84_A * lat.cos() * lon.sin(),
                WGS84_A * lat.sin(),
            );
            let dv = Vector3::new(d[0], d[1], d[2]);
            let v = EcefPosition::from_vector(reference.to_vector() + dv);
            let enu = ecef_to_local(reference, v).unwrap();
            let expect = (v.to_vector() - reference.to_vector()).norm();
            prop_assert!((enu.norm() - expect).abs() <= 1e-9 * expect.max(1.0));
        }
    }
}
