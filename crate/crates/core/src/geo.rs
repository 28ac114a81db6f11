//! Spherical-earth primitives: coordinates, great-circle distance, bearings
//! and the eight compass actions.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean earth radius in statute miles.
pub const EARTH_RADIUS_MILES: f64 = 3958.7613;

/// A latitude/longitude pair in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    /// Validated constructor: latitude in [-90, 90], longitude in [-180, 180).
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..180.0).contains(&lon) {
            Ok(GeoPoint { lat, lon })
        } else {
            Err(Error::InvalidCoordinate { lat, lon })
        }
    }

    pub fn is_valid(&self) -> bool {
        GeoPoint::new(self.lat, self.lon).is_ok()
    }
}

/// Great-circle distance in miles (haversine form).
pub fn haversine_miles(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = p2 - p1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin()
}

/// Initial great-circle bearing from `a` to `b`, degrees clockwise from north in [0, 360).
pub fn bearing_degrees(a: GeoPoint, b: GeoPoint) -> Result<f64> {
    if a == b {
        return Err(Error::UndefinedBearing);
    }
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlon = (b.lon - a.lon).to_radians();
    let y = dlon.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dlon.cos();
    let deg = y.atan2(x).to_degrees().rem_euclid(360.0);
    Ok(if deg >= 360.0 { 0.0 } else { deg })
}

/// Great-circle midpoint of `a` and `b`.
pub fn midpoint(a: GeoPoint, b: GeoPoint) -> GeoPoint {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let l1 = a.lon.to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let bx = p2.cos() * dlon.cos();
    let by = p2.cos() * dlon.sin();
    let lat = (p1.sin() + p2.sin()).atan2(((p1.cos() + bx).powi(2) + by * by).sqrt());
    let lon = l1 + by.atan2(p1.cos() + bx);
    GeoPoint {
        lat: lat.to_degrees().clamp(-90.0, 90.0),
        lon: normalize_lon(lon.to_degrees()),
    }
}

fn normalize_lon(lon: f64) -> f64 {
    let l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l >= 180.0 { -180.0 } else { l }
}

/// One of the eight movement directions available at an intersection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompassAction {
    N,
    NE,
    E,
    SE,
    S,
    SW,
    W,
    NW,
}

impl CompassAction {
    pub const COUNT: usize = 8;

    pub const ALL: [CompassAction; 8] = [
        CompassAction::N,
        CompassAction::NE,
        CompassAction::E,
        CompassAction::SE,
        CompassAction::S,
        CompassAction::SW,
        CompassAction::W,
        CompassAction::NW,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Bearing of the sector center in degrees.
    pub fn center_degrees(self) -> f64 {
        self.index() as f64 * 45.0
    }

    /// The action `k` sectors clockwise (negative = counter-clockwise).
    pub fn rotate(self, k: i32) -> Self {
        Self::ALL[(self.index() as i32 + k).rem_euclid(8) as usize]
    }
}

impl fmt::Display for CompassAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Maps a bearing onto its 45°-wide compass sector; sectors are lower-inclusive,
/// so N covers [337.5, 360) ∪ [0, 22.5).
pub fn compass_sector(bearing: f64) -> CompassAction {
    let shifted = (bearing + 22.5).rem_euclid(360.0);
    let idx = (shifted / 45.0).floor() as usize % 8;
    CompassAction::ALL[idx]
}

/// Smallest absolute angle between two bearings, in degrees.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn haversine_identity_and_antipode() {
        let a = p(42.3601, -71.0589);
        assert_eq!(haversine_miles(a, a), 0.0);
        let d = haversine_miles(p(0.0, 0.0), p(0.0, -180.0));
        assert!((d - PI * EARTH_RADIUS_MILES).abs() < 1e-9);
        assert!((d - 12436.8).abs() < 0.1);
    }

    #[test]
    fn haversine_matches_law_of_cosines() {
        // Spherical law of cosines, written independently.
        let (a, b) = (p(42.3601, -71.0589), p(42.3611, -71.0589));
        let (f1, f2) = (a.lat * PI / 180.0, b.lat * PI / 180.0);
        let dl = (b.lon - a.lon) * PI / 180.0;
        let c = f1.sin() * f2.sin() + f1.cos() * f2.cos() * dl.cos();
        let oracle = c.clamp(-1.0, 1.0).acos() * EARTH_RADIUS_MILES;
        let got = haversine_miles(a, b);
        // acos is ill-conditioned for tiny arcs; the meridian arc gives an exact reference too.
        let meridian = (b.lat - a.lat).abs() * PI / 180.0 * EARTH_RADIUS_MILES;
        assert!(((got - meridian) / meridian).abs() < 1e-9);
        assert!(((got - oracle) / oracle).abs() < 1e-6);
    }

    #[test]
    fn bearing_cardinal_cases() {
        assert_eq!(bearing_degrees(p(10.0, 5.0), p(11.0, 5.0)).unwrap(), 0.0);
        assert!((bearing_degrees(p(0.0, 0.0), p(0.0, 1.0)).unwrap() - 90.0).abs() < 1e-12);
        assert!((bearing_degrees(p(0.0, 0.0), p(-1.0, 0.0)).unwrap() - 180.0).abs() < 1e-12);
        assert!((bearing_degrees(p(0.0, 0.0), p(0.0, -1.0)).unwrap() - 270.0).abs() < 1e-12);
        assert!(matches!(bearing_degrees(p(1.0, 1.0), p(1.0, 1.0)), Err(Error::UndefinedBearing)));
    }

    #[test]
    fn bearing_matches_forward_azimuth_oracle() {
        // Forward azimuth via 3-D unit vectors: project the target direction onto
        // the local north/east basis at the start point.
        let (a, b) = (p(42.36, -71.06), p(42.37, -71.05));
        let v = |q: GeoPoint| {
            let (f, l) = (q.lat.to_radians(), q.lon.to_radians());
            [f.cos() * l.cos(), f.cos() * l.sin(), f.sin()]
        };
        let (va, vb) = (v(a), v(b));
        let (f, l) = (a.lat.to_radians(), a.lon.to_radians());
        let east = [-l.sin(), l.cos(), 0.0];
        let north = [-f.sin() * l.cos(), -f.sin() * l.sin(), f.cos()];
        let dot = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
        let d = [vb[0] - va[0], vb[1] - va[1], vb[2] - va[2]];
        let oracle = dot(d, east).atan2(dot(d, north)).to_degrees().rem_euclid(360.0);
        let got = bearing_degrees(a, b).unwrap();
        assert!((got - oracle).abs() < 1e-6, "{got} vs {oracle}");
    }

    #[test]
    fn sectors() {
        assert_eq!(compass_sector(0.0), CompassAction::N);
        assert_eq!(compass_sector(44.9), CompassAction::NE);
        assert_eq!(compass_sector(337.5), CompassAction::N);
        assert_eq!(compass_sector(22.5), CompassAction::NE);
        assert_eq!(compass_sector(337.4999), CompassAction::NW);
        assert_eq!(compass_sector(180.0), CompassAction::S);
        assert_eq!(compass_sector(359.999), CompassAction::N);
    }

    #[test]
    fn action_index_bijective() {
        for (i, a) in CompassAction::ALL.iter().enumerate() {
            assert_eq!(a.index(), i);
            assert_eq!(CompassAction::from_index(i), Some(*a));
            assert_eq!(compass_sector(a.center_degrees()), *a);
        }
        assert_eq!(CompassAction::from_index(8), None);
        assert_eq!(CompassAction::N.rotate(-1), CompassAction::NW);
    }

    #[test]
    fn midpoint_is_equidistant() {
        let (a, b) = (p(42.35, -71.07), p(42.37, -71.05));
        let m = midpoint(a, b);
        assert!((haversine_miles(a, m) - haversine_miles(m, b)).abs() < 1e-9);
        assert!((haversine_miles(a, m) * 2.0 - haversine_miles(a, b)).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(GeoPoint::new(91.0, 0.0).is_err());
        assert!(GeoPoint::new(0.0, 180.0).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(GeoPoint::new(-90.0, -180.0).is_ok());
    }
}
