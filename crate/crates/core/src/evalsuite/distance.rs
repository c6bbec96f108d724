//! Distance estimation error of the location hash over random pairs at a
//! fixed separation, as a function of hash length and of separation.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rayon::prelude::*;

use super::{unit_rng, unit_seed, EvalError};
use crate::geo::{central_angle, destination, distance_error, geodetic_to_ecef, GeodeticCoord};
use crate::sblsh::{estimate_angle, SblshParams};

pub const DEFAULT_K_LIST: [usize; 8] = [128, 256, 512, 1024, 2048, 4096, 8192, 16384];
pub const DEFAULT_DISTANCES_KM: [f64; 7] = [5.0, 10.0, 25.0, 50.0, 100.0, 500.0, 1000.0];

/// Uniform point on the sphere, then a uniform-bearing great-circle step
/// of `distance_km`. Both points at zero height.
pub fn random_pair<R: Rng>(rng: &mut R, distance_km: f64) -> (GeodeticCoord, GeodeticCoord) {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let lon: f64 = rng.gen_range(-PI..PI);
    let start = GeodeticCoord::from_radians(z.asin(), lon, 0.0).expect("in range");
    let end = destination(&start, rng.gen_range(0.0..TAU), distance_km);
    (start, end)
}

struct Pair {
    a: [f64; 3],
    b: [f64; 3],
    theta: f64,
}

fn make_pairs(seed: u64, tag: u64, count: usize, distance_km: f64) -> Result<Vec<Pair>, EvalError> {
    let mut rng = unit_rng(seed, &[tag, distance_km.to_bits()]);
    (0..count)
        .map(|_| {
            let (a, b) = random_pair(&mut rng, distance_km);
            let (pa, pb) = (geodetic_to_ecef(&a), geodetic_to_ecef(&b));
            Ok(Pair { a: pa.to_array(), b: pb.to_array(), theta: central_angle(&pa, &pb)? })
        })
        .collect()
}

/// Signed errors (km) for every pair under every hash instance, instance-major.
fn signed_errors(
    pairs: &[Pair],
    bits: usize,
    depth: usize,
    instances: usize,
    seed: u64,
    tag: u64,
) -> Result<Vec<f64>, EvalError> {
    let per_instance: Vec<Result<Vec<f64>, EvalError>> = (0..instances as u64)
        .into_par_iter()
        .map(|i| {
            let params = SblshParams::generate(3, bits, depth, unit_seed(seed, &[tag, bits as u64, i]))?;
            pairs
                .iter()
                .map(|p| {
                    let approx = estimate_angle(&params.hash(&p.a)?, &params.hash(&p.b)?)?;
                    Ok(distance_error(p.theta, approx)?)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(instances * pairs.len());
    for chunk in per_instance {
        out.extend(chunk?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KSweepConfig {
    pub pairs: usize,
    pub distance_km: f64,
    pub ks: Vec<usize>,
    pub instances: usize,
    pub depth: usize,
    pub seed: u64,
}

impl Default for KSweepConfig {
    fn default() -> Self {
        Self { pairs: 1000, distance_km: 25.0, ks: DEFAULT_K_LIST.to_vec(), instances: 100, depth: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSweepRow {
    pub k: usize,
    pub mae_km: f64,
    pub rmse_km: f64,
}

impl KSweepRow {
    pub const CSV_HEADER: &'static str = "K,mae_km,rmse_km";

    pub fn csv(&self) -> String {
        format!("{},{},{}", self.k, self.mae_km, self.rmse_km)
    }
}

pub fn run_k_sweep(cfg: &KSweepConfig) -> Result<Vec<KSweepRow>, EvalError> {
    if cfg.ks.is_empty() || cfg.pairs == 0 || cfg.instances == 0 {
        return Err(EvalError::Config("k sweep needs K values, pairs and instances".into()));
    }
    let pairs = make_pairs(cfg.seed, 1, cfg.pairs, cfg.distance_km)?;
    cfg.ks
        .iter()
        .map(|&k| {
            let e = signed_errors(&pairs, k, cfg.depth, cfg.instances, cfg.seed, 1)?;
            let n = e.len() as f64;
            Ok(KSweepRow {
                k,
                mae_km: e.iter().map(|x| x.abs()).sum::<f64>() / n,
                rmse_km: (e.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistErrConfig {
    pub distances_km: Vec<f64>,
    pub pairs: usize,
    pub instances: usize,
    pub bits: usize,
    pub depth: usize,
    pub seed: u64,
}

impl Default for DistErrConfig {
    fn default() -> Self {
        Self { distances_km: DEFAULT_DISTANCES_KM.to_vec(), pairs: 1000, instances: 100, bits: 4096, depth: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistErrRow {
    pub distance_km: f64,
    pub mae: f64,
    pub rmse: f64,
    pub mean: f64,
    /// Population standard deviation of the signed errors.
    pub std: f64,
}

impl DistErrRow {
    pub const CSV_HEADER: &'static str = "distance_km,mae,rmse,mean,std";

    pub fn csv(&self) -> String {
        format!("{},{},{},{},{}", self.distance_km, self.mae, self.rmse, self.mean, self.std)
    }

    pub fn from_errors(distance_km: f64, e: &[f64]) -> Self {
        let n = e.len() as f64;
        let mean = e.iter().sum::<f64>() / n;
        Self {
            distance_km,
            mae: e.iter().map(|x| x.abs()).sum::<f64>() / n,
            rmse: (e.iter().map(|x| x * x).sum::<f64>() / n).sqrt(),
            mean,
            std: (e.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt(),
        }
    }
}

/// Signed-error histogram with fixed-width bins, contiguous from the lowest
/// occupied bin to the highest (empty bins included).
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width_m: i64,
    /// (bin lower edge in meters, count)
    pub bins: Vec<(i64, u64)>,
}

impl Histogram {
    pub const CSV_HEADER: &'static str = "bin_lo_m,count";

    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.1).sum()
    }

    pub fn to_csv(&self) -> String {
        super::to_csv(Self::CSV_HEADER, &self.bins, |(lo, c)| format!("{lo},{c}"))
    }
}

/// Bins signed errors given in km into `bin_width_m` meter bins.
pub fn error_histogram(errors_km: &[f64], bin_width_m: i64) -> Histogram {
    let mut counts = BTreeMap::new();
    for e in errors_km {
        let bin = ((e * 1000.0) / bin_width_m as f64).floor() as i64 * bin_width_m;
        *counts.entry(bin).or_insert(0u64) += 1;
    }
    let bins = match (counts.keys().next(), counts.keys().next_back()) {
        (Some(&lo), Some(&hi)) => {
            (0..=(hi - lo) / bin_width_m).map(|i| lo + i * bin_width_m).map(|b| (b, *counts.get(&b).unwrap_or(&0))).collect()
        }
        _ => Vec::new(),
    };
    Histogram { bin_width_m, bins }
}

pub fn run_distance_error_study(cfg: &DistErrConfig) -> Result<Vec<(DistErrRow, Histogram)>, EvalError> {
    if cfg.pairs == 0 || cfg.instances == 0 {
        return Err(EvalError::Config("distance study needs pairs and instances".into()));
    }
    cfg.distances_km
        .iter()
        .map(|&d| {
            let pairs = make_pairs(cfg.seed, 2, cfg.pairs, d)?;
            let e = signed_errors(&pairs, cfg.bits, cfg.depth, cfg.instances, cfg.seed, 2)?;
            Ok((DistErrRow::from_errors(d, &e), error_histogram(&e, 1000)))
        })
        .collect()
}
