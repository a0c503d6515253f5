//! Geodetic points, the local East-North-Up working frame and compass poses.
//!
//! All geometry in the stack runs in a flat local ENU frame anchored at a
//! scenario origin. Yaw uses the compass convention everywhere: 0° is North,
//! angles grow clockwise. Pitch is positive above the horizon.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::FramesError;

/// Meters per degree of latitude used by the flat-earth conversion.
pub const METERS_PER_DEGREE: f64 = 111_319.4908;

/// WGS84 position in degrees and meters above the ellipsoid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
    pub alt: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64, alt: f64) -> Self {
        Self { lat, lon, alt }
    }

    pub fn is_valid(&self) -> bool {
        (-90.0..=90.0).contains(&self.lat)
            && (-180.0..180.0).contains(&self.lon)
            && self.alt.is_finite()
    }
}

/// Point in the local East-North-Up frame, meters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnuPoint {
    pub e: f64,
    pub n: f64,
    pub u: f64,
}

impl EnuPoint {
    pub const ORIGIN: EnuPoint = EnuPoint { e: 0.0, n: 0.0, u: 0.0 };

    pub const fn new(e: f64, n: f64, u: f64) -> Self {
        Self { e, n, u }
    }

    pub fn vec(&self) -> Vector3<f64> {
        Vector3::new(self.e, self.n, self.u)
    }

    pub fn norm(&self) -> f64 {
        self.vec().norm()
    }

    pub fn distance(&self, other: &EnuPoint) -> f64 {
        (*self - *other).norm()
    }

    /// Distance in the horizontal (e, n) plane.
    pub fn horizontal_distance(&self, other: &EnuPoint) -> f64 {
        (self.e - other.e).hypot(self.n - other.n)
    }

    pub fn with_u(self, u: f64) -> Self {
        Self { u, ..self }
    }

    pub fn is_finite(&self) -> bool {
        self.e.is_finite() && self.n.is_finite() && self.u.is_finite()
    }
}

impl From<Vector3<f64>> for EnuPoint {
    fn from(v: Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }
}

impl Add for EnuPoint {
    type Output = EnuPoint;
    fn add(self, rhs: EnuPoint) -> EnuPoint {
        EnuPoint::new(self.e + rhs.e, self.n + rhs.n, self.u + rhs.u)
    }
}

impl Add<Vector3<f64>> for EnuPoint {
    type Output = EnuPoint;
    fn add(self, rhs: Vector3<f64>) -> EnuPoint {
        EnuPoint::new(self.e + rhs.x, self.n + rhs.y, self.u + rhs.z)
    }
}

impl Sub for EnuPoint {
    type Output = EnuPoint;
    fn sub(self, rhs: EnuPoint) -> EnuPoint {
        EnuPoint::new(self.e - rhs.e, self.n - rhs.n, self.u - rhs.u)
    }
}

impl Mul<f64> for EnuPoint {
    type Output = EnuPoint;
    fn mul(self, rhs: f64) -> EnuPoint {
        EnuPoint::new(self.e * rhs, self.n * rhs, self.u * rhs)
    }
}

impl Neg for EnuPoint {
    type Output = EnuPoint;
    fn neg(self) -> EnuPoint {
        EnuPoint::new(-self.e, -self.n, -self.u)
    }
}

/// Flat-earth conversion of `p` into the ENU frame anchored at `origin`.
pub fn geo_to_enu(p: &GeoPoint, origin: &GeoPoint) -> Result<EnuPoint, FramesError> {
    let dlat = p.lat - origin.lat;
    if dlat.abs() >= 1.0 || !dlat.is_finite() {
        return Err(FramesError::OutOfTangentRange { dlat });
    }
    let dlon = wrap_lon_delta(p.lon - origin.lon);
    Ok(EnuPoint {
        e: dlon * origin.lat.to_radians().cos() * METERS_PER_DEGREE,
        n: dlat * METERS_PER_DEGREE,
        u: p.alt - origin.alt,
    })
}

/// Exact inverse of [`geo_to_enu`].
pub fn enu_to_geo(p: &EnuPoint, origin: &GeoPoint) -> GeoPoint {
    let dlat = p.n / METERS_PER_DEGREE;
    let dlon = p.e / (origin.lat.to_radians().cos() * METERS_PER_DEGREE);
    let mut lon = origin.lon + dlon;
    if lon >= 180.0 {
        lon -= 360.0;
    } else if lon < -180.0 {
        lon += 360.0;
    }
    GeoPoint {
        lat: origin.lat + dlat,
        lon,
        alt: origin.alt + p.u,
    }
}

fn wrap_lon_delta(d: f64) -> f64 {
    if d > 180.0 {
        d - 360.0
    } else if d < -180.0 {
        d + 360.0
    } else {
        d
    }
}

/// Position plus compass yaw and pitch, both in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: EnuPoint,
    pub yaw: f64,
    pub pitch: f64,
}

impl Pose {
    pub fn new(position: EnuPoint, yaw: f64, pitch: f64) -> Self {
        Self {
            position,
            yaw: wrap_deg_360(yaw),
            pitch: pitch.clamp(-90.0, 90.0),
        }
    }

    /// Pose at `from` looking exactly at `target`.
    pub fn look_at(from: EnuPoint, target: EnuPoint) -> Self {
        let (yaw, pitch) = look_angles(&from, &target);
        Self::new(from, yaw, pitch)
    }

    /// Unit viewing direction in ENU.
    pub fn forward(&self) -> Vector3<f64> {
        direction_from_angles(self.yaw, self.pitch)
    }

    /// Unit vector to the right of the viewing direction (always horizontal).
    pub fn right(&self) -> Vector3<f64> {
        let y = self.yaw.to_radians();
        Vector3::new(y.cos(), -y.sin(), 0.0)
    }

    /// Unit vector pointing down in the image plane.
    pub fn down(&self) -> Vector3<f64> {
        self.forward().cross(&self.right())
    }
}

/// Compass bearing in degrees from `from` to `to` in the horizontal plane.
pub fn bearing_deg(from: &EnuPoint, to: &EnuPoint) -> f64 {
    wrap_deg_360((to.e - from.e).atan2(to.n - from.n).to_degrees())
}

/// Compass yaw and elevation pitch (degrees) of the ray from `from` to `to`.
pub fn look_angles(from: &EnuPoint, to: &EnuPoint) -> (f64, f64) {
    let d = *to - *from;
    let horiz = d.e.hypot(d.n);
    (bearing_deg(from, to), d.u.atan2(horiz).to_degrees())
}

/// Unit direction for compass yaw and pitch in degrees.
pub fn direction_from_angles(yaw_deg: f64, pitch_deg: f64) -> Vector3<f64> {
    let (y, p) = (yaw_deg.to_radians(), pitch_deg.to_radians());
    Vector3::new(y.sin() * p.cos(), y.cos() * p.cos(), p.sin())
}

pub fn wrap_deg_360(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    // rem_euclid can return 360.0 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Signed shortest-arc difference `to - from` in (-180, 180].
pub fn shortest_arc_deg(from: f64, to: f64) -> f64 {
    let d = (to - from).rem_euclid(360.0);
    if d > 180.0 {
        d - 360.0
    } else {
        d
    }
}
