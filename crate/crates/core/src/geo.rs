//! WGS84 geodesy and the sphere-based distance math used by the location hash.
//!
//! Angles are radians everywhere except on [`GeodeticCoord`], which carries
//! degrees because that is what devices report.

use std::f64::consts::PI;

use thiserror::Error;

/// WGS84 semi-major axis (m).
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 semi-minor axis (m).
pub const WGS84_B: f64 = 6_356_752.3142;
/// Published WGS84 squared first eccentricity.
pub const WGS84_E2: f64 = 6.694_379_990_14e-3;
/// Mean Earth radius (km) used for chord distances.
pub const MEAN_EARTH_RADIUS_KM: f64 = 6371.0;

/// Squared eccentricity as implied by `WGS84_A` and `WGS84_B`.
///
/// The published `WGS84_E2` is a rounded figure that disagrees with
/// `1 - b²/a²` by about 2e-9 relative, enough to move the polar ECEF
/// coordinate by ~45 µm. The conversion uses this value so the ellipsoid
/// stays self-consistent (the pole lands exactly on `b`).
pub const WGS84_E2_DERIVED: f64 = 1.0 - (WGS84_B * WGS84_B) / (WGS84_A * WGS84_A);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90] degrees")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180] degrees")]
    Longitude(f64),
    #[error("altitude {0} is not finite")]
    Altitude(f64),
    #[error("pressure must be positive (p={p}, p0={p0})")]
    Pressure { p: f64, p0: f64 },
    #[error("reference temperature {0} is not finite")]
    Temperature(f64),
    #[error("zero-length vector")]
    ZeroVector,
    #[error("angle {0} outside [0, pi]")]
    Angle(f64),
    #[error("distance {0} km is not a valid chord length")]
    Distance(f64),
}

/// Geodetic position: latitude/longitude in degrees, ellipsoidal height in meters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "RawCoord")]
pub struct GeodeticCoord {
    lat: f64,
    lon: f64,
    alt: f64,
}

impl GeodeticCoord {
    pub fn new(lat: f64, lon: f64, alt: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        if !alt.is_finite() {
            return Err(GeoError::Altitude(alt));
        }
        Ok(Self { lat, lon, alt })
    }

    /// Builds a coordinate from radians, wrapping longitude into [-180, 180].
    pub fn from_radians(lat: f64, lon: f64, alt: f64) -> Result<Self, GeoError> {
        Self::new(lat.to_degrees(), wrap_lon_deg(lon.to_degrees()), alt)
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    pub fn alt(&self) -> f64 {
        self.alt
    }

    pub fn with_alt(self, alt: f64) -> Result<Self, GeoError> {
        Self::new(self.lat, self.lon, alt)
    }

    /// Unit vector of this position on a sphere (latitude taken as spherical).
    pub fn unit_vector(&self) -> [f64; 3] {
        let (lat, lon) = (self.lat.to_radians(), self.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }
}

#[derive(serde::Deserialize)]
struct RawCoord {
    lat: f64,
    lon: f64,
    #[serde(default)]
    alt: f64,
}

impl TryFrom<RawCoord> for GeodeticCoord {
    type Error = GeoError;
    fn try_from(r: RawCoord) -> Result<Self, GeoError> {
        Self::new(r.lat, r.lon, r.alt)
    }
}

fn wrap_lon_deg(lon: f64) -> f64 {
    let mut l = (lon + 180.0).rem_euclid(360.0) - 180.0;
    if l < -180.0 {
        l = -180.0;
    }
    l
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EcefPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &EcefPoint) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

/// Geodetic to Earth-centred Earth-fixed coordinates on the WGS84 ellipsoid.
pub fn geodetic_to_ecef(g: &GeodeticCoord) -> EcefPoint {
    let (lat, lon, h) = (g.lat.to_radians(), g.lon.to_radians(), g.alt);
    let n = prime_vertical_radius(lat);
    let ratio = (WGS84_B * WGS84_B) / (WGS84_A * WGS84_A);
    EcefPoint {
        x: (n + h) * lat.cos() * lon.cos(),
        y: (n + h) * lat.cos() * lon.sin(),
        z: (ratio * n + h) * lat.sin(),
    }
}

/// Inverse of [`geodetic_to_ecef`], by fixed-point iteration on latitude.
pub fn ecef_to_geodetic(p: &EcefPoint) -> Result<GeodeticCoord, GeoError> {
    if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) || p.norm() == 0.0 {
        return Err(GeoError::ZeroVector);
    }
    let e2 = WGS84_E2_DERIVED;
    let rho = p.x.hypot(p.y);
    let lon = p.y.atan2(p.x);
    // Near the poles cos(lat) vanishes, so height comes from z there.
    let height = |lat: f64| {
        let n = prime_vertical_radius(lat);
        if lat.abs() < PI / 4.0 {
            rho / lat.cos() - n
        } else {
            p.z / lat.sin() - n * (1.0 - e2)
        }
    };
    let mut lat = p.z.atan2(rho * (1.0 - e2));
    for _ in 0..50 {
        let n = prime_vertical_radius(lat);
        let h = height(lat);
        let next = p.z.atan2(rho * (1.0 - e2 * n / (n + h)));
        let done = (next - lat).abs() < 1e-15;
        lat = next;
        if done {
            break;
        }
    }
    GeodeticCoord::new(lat.to_degrees().clamp(-90.0, 90.0), lon.to_degrees(), height(lat))
}

/// Prime vertical radius of curvature N(φ), φ in radians.
pub fn prime_vertical_radius(lat: f64) -> f64 {
    let s = lat.sin();
    WGS84_A / (1.0 - WGS84_E2_DERIVED * s * s).sqrt()
}

/// Height (m) above the reference level from measured pressure `p` (hPa),
/// reference pressure `p0` (hPa) and reference temperature `t0` (°C).
pub fn barometric_altitude(p: f64, p0: f64, t0: f64) -> Result<f64, GeoError> {
    if !(p > 0.0 && p0 > 0.0) || !p.is_finite() || !p0.is_finite() {
        return Err(GeoError::Pressure { p, p0 });
    }
    if !t0.is_finite() {
        return Err(GeoError::Temperature(t0));
    }
    Ok((273.15 + t0) / 0.0065 * (1.0 - (p / p0).powf(1.0 / 5.255)))
}

/// Pressure (hPa) that [`barometric_altitude`] maps to `height` meters.
pub fn pressure_at_altitude(height: f64, p0: f64, t0: f64) -> f64 {
    p0 * (1.0 - height * 0.0065 / (273.15 + t0)).powf(5.255)
}

/// Angle between two position vectors, in [0, π].
pub fn central_angle(a: &EcefPoint, b: &EcefPoint) -> Result<f64, GeoError> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return Err(GeoError::ZeroVector);
    }
    let c = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(c.acos())
}

fn check_angle(theta: f64) -> Result<(), GeoError> {
    if (0.0..=PI).contains(&theta) {
        Ok(())
    } else {
        Err(GeoError::Angle(theta))
    }
}

/// Straight-line distance (km) between two points on the mean sphere
/// separated by central angle `theta`.
pub fn chord_distance(theta: f64) -> Result<f64, GeoError> {
    check_angle(theta)?;
    Ok(2.0 * MEAN_EARTH_RADIUS_KM * (theta / 2.0).sin())
}

/// Inverse of [`chord_distance`].
pub fn chord_to_angle(distance_km: f64) -> Result<f64, GeoError> {
    if !(0.0..=2.0 * MEAN_EARTH_RADIUS_KM).contains(&distance_km) {
        return Err(GeoError::Distance(distance_km));
    }
    Ok(2.0 * (distance_km / (2.0 * MEAN_EARTH_RADIUS_KM)).asin())
}

/// Signed error (km) of a distance derived from an approximate angle against
/// the one derived from the true angle. Negative when the estimate overshoots.
pub fn distance_error(theta_true: f64, theta_approx: f64) -> Result<f64, GeoError> {
    check_angle(theta_true)?;
    check_angle(theta_approx)?;
    Ok(2.0 * MEAN_EARTH_RADIUS_KM * ((theta_true / 2.0).sin() - (theta_approx / 2.0).sin()))
}

/// Great-circle distance (km) on the mean sphere, haversine form.
pub fn great_circle_km(a: &GeodeticCoord, b: &GeodeticCoord) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * MEAN_EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Point reached by travelling `distance_km` along a great circle of the
/// mean sphere from `start` at initial `bearing` (radians clockwise from
/// north). Altitude is carried over from `start`.
pub fn destination(start: &GeodeticCoord, bearing: f64, distance_km: f64) -> GeodeticCoord {
    let delta = distance_km / MEAN_EARTH_RADIUS_KM;
    let lat1 = start.lat.to_radians();
    let lon1 = start.lon.to_radians();
    let sin_lat2 = lat1.sin() * delta.cos() + lat1.cos() * delta.sin() * bearing.cos();
    let lat2 = sin_lat2.clamp(-1.0, 1.0).asin();
    let lon2 = lon1
        + (bearing.sin() * delta.sin() * lat1.cos()).atan2(delta.cos() - lat1.sin() * sin_lat2);
    GeodeticCoord {
        lat: lat2.to_degrees().clamp(-90.0, 90.0),
        lon: wrap_lon_deg(lon2.to_degrees()),
        alt: start.alt,
    }
}

/// Local east/north offset (meters) applied on the mean sphere.
pub fn offset_en(start: &GeodeticCoord, east_m: f64, north_m: f64) -> GeodeticCoord {
    let dist_km = (east_m * east_m + north_m * north_m).sqrt() / 1000.0;
    if dist_km == 0.0 {
        return *start;
    }
    destination(start, east_m.atan2(north_m), dist_km)
}
