//! Locating an unknown point from hash-estimated distances to two known
//! anchors, by intersecting two circles on the unit sphere.

use rayon::prelude::*;

use super::{median, unit_seed, EvalError};
use crate::geo::{
    central_angle, ecef_to_geodetic, geodetic_to_ecef, great_circle_km, EcefPoint, GeodeticCoord, WGS84_A, WGS84_B,
};
use crate::sblsh::{estimate_angle, SblshParams};

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn unit(p: &EcefPoint) -> [f64; 3] {
    let n = p.norm();
    [p.x / n, p.y / n, p.z / n]
}

fn combine(ca: f64, a: [f64; 3], cb: f64, b: [f64; 3]) -> [f64; 3] {
    [ca * a[0] + cb * b[0], ca * a[1] + cb * b[1], ca * a[2] + cb * b[2]]
}

/// Result of intersecting two circles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFix {
    /// The two candidate directions (equal when tangent).
    pub candidates: [[f64; 3]; 2],
    /// True when the circles did not meet and radii were adjusted to
    /// tangency first.
    pub adjusted: bool,
}

/// Intersects the circles of angular radius `r1` about unit vector `a` and
/// `r2` about `b`.
///
/// Circles that miss each other are grown (or, when one encloses the
/// other, the larger shrunk and the smaller grown) by equal amounts until
/// they touch, and the touching point is returned.
pub fn intersect_circles(a: [f64; 3], b: [f64; 3], r1: f64, r2: f64) -> Result<CircleFix, EvalError> {
    let cos_g = dot(a, b).clamp(-1.0, 1.0);
    let gamma = cos_g.acos();
    let axis = cross(a, b);
    let axis_sq = dot(axis, axis);
    if axis_sq < 1e-24 {
        return Err(EvalError::Config("anchors coincide or are antipodal".into()));
    }

    let (mut r1, mut r2) = (r1, r2);
    let mut adjusted = false;
    if r1 + r2 < gamma {
        let delta = (gamma - r1 - r2) / 2.0;
        r1 += delta;
        r2 += delta;
        adjusted = true;
    } else if (r1 - r2).abs() > gamma {
        let delta = ((r1 - r2).abs() - gamma) / 2.0;
        if r1 > r2 {
            r1 -= delta;
            r2 += delta;
        } else {
            r1 += delta;
            r2 -= delta;
        }
        adjusted = true;
    }

    let denom = 1.0 - cos_g * cos_g;
    let c1 = (r1.cos() - r2.cos() * cos_g) / denom;
    let c2 = (r2.cos() - r1.cos() * cos_g) / denom;
    let base = combine(c1, a, c2, b);
    // Rounding can leave a tiny negative at tangency.
    let t = ((1.0 - dot(base, base)) / axis_sq).max(0.0).sqrt();
    let plus = [base[0] + t * axis[0], base[1] + t * axis[1], base[2] + t * axis[2]];
    let minus = [base[0] - t * axis[0], base[1] - t * axis[1], base[2] - t * axis[2]];
    Ok(CircleFix { candidates: [plus, minus], adjusted })
}

/// Point on the ellipsoid surface along direction `u` from the centre.
pub fn surface_point(u: [f64; 3]) -> Result<GeodeticCoord, EvalError> {
    let s = 1.0 / ((u[0] * u[0] + u[1] * u[1]) / (WGS84_A * WGS84_A) + u[2] * u[2] / (WGS84_B * WGS84_B)).sqrt();
    Ok(ecef_to_geodetic(&EcefPoint::new(s * u[0], s * u[1], s * u[2]))?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationConfig {
    pub bits: usize,
    pub depth: usize,
    pub trials: usize,
    pub seed: u64,
    /// Skip hashing and use true angles; checks the geometry alone.
    pub exact: bool,
}

impl Default for TriangulationConfig {
    fn default() -> Self {
        Self { bits: 4096, depth: 3, trials: 1000, seed: 0, exact: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangulationReport {
    /// Per trial: distance (km) from the nearer candidate to the true point.
    pub errors_km: Vec<f64>,
    /// Trials whose circles had to be adjusted to tangency.
    pub adjusted: usize,
    pub mae_km: f64,
    pub median_km: f64,
}

pub fn run_triangulation_attack(
    a: &GeodeticCoord,
    b: &GeodeticCoord,
    c_true: &GeodeticCoord,
    cfg: &TriangulationConfig,
) -> Result<TriangulationReport, EvalError> {
    if great_circle_km(a, b) < 1e-6 {
        return Err(EvalError::Config("anchors must differ".into()));
    }
    if cfg.trials == 0 {
        return Err(EvalError::Config("at least one trial".into()));
    }
    let (pa, pb, pc) = (geodetic_to_ecef(a), geodetic_to_ecef(b), geodetic_to_ecef(c_true));
    let true_angles = (central_angle(&pa, &pc)?, central_angle(&pb, &pc)?);

    let outcomes: Vec<Result<(f64, bool), EvalError>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| {
            let (r1, r2) = if cfg.exact {
                true_angles
            } else {
                let params = SblshParams::generate(3, cfg.bits, cfg.depth, unit_seed(cfg.seed, &[3, t]))?;
                let (ha, hb, hc) =
                    (params.hash(&pa.to_array())?, params.hash(&pb.to_array())?, params.hash(&pc.to_array())?);
                (estimate_angle(&ha, &hc)?, estimate_angle(&hb, &hc)?)
            };
            let fix = intersect_circles(unit(&pa), unit(&pb), r1, r2)?;
            let mut best = f64::INFINITY;
            for cand in fix.candidates {
                best = best.min(great_circle_km(&surface_point(cand)?, c_true));
            }
            Ok((best, fix.adjusted))
        })
        .collect();

    let mut errors_km = Vec::with_capacity(cfg.trials);
    let mut adjusted = 0;
    for o in outcomes {
        let (e, adj) = o?;
        errors_km.push(e);
        adjusted += usize::from(adj);
    }
    Ok(TriangulationReport {
        mae_km: super::mean(&errors_km),
        median_km: median(&errors_km),
        errors_km,
        adjusted,
    })
}
