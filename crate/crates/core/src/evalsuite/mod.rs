//! Experiment harness: hash-length calibration, distance error statistics,
//! the two-anchor triangulation attack and the modified-field ROC study.
//!
//! Every experiment is a pure function of its config. Work fans out with
//! rayon, but each unit draws from an RNG keyed by (seed, unit index), so
//! results do not depend on scheduling.

mod bank;
mod distance;
mod roc;
mod triangulate;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

pub use bank::{prepare_bank, BankConfig, BankUser};
pub use distance::{
    error_histogram, random_pair, run_distance_error_study, run_k_sweep, DistErrConfig, DistErrRow, Histogram,
    KSweepConfig, KSweepRow, DEFAULT_DISTANCES_KM, DEFAULT_K_LIST,
};
pub use roc::{
    mann_whitney_auc, roc_points, run_robustness_roc, vertical_average, run_separation, RocConfig, RocPoint, RocReport, SeparationRow,
};
pub use triangulate::{
    intersect_circles, run_triangulation_attack, surface_point, CircleFix, TriangulationConfig, TriangulationReport,
};

use crate::authmodel::ModelError;
use crate::geo::GeoError;
use crate::protect::ProtectError;
use crate::sblsh::LshError;
use crate::simgen::SimError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Lsh(#[from] LshError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Protect(#[from] ProtectError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("key generation failed: {0}")]
    Keys(String),
}

/// Independent RNG for one unit of work.
pub fn unit_rng(seed: u64, stream: &[u64]) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut mix = 0x9e37_79b9_7f4a_7c15u64;
    for &s in stream {
        mix = (mix ^ s).wrapping_mul(0x100_0000_01b3).rotate_left(17) ^ s;
    }
    key[8..16].copy_from_slice(&mix.to_le_bytes());
    key[16..24].copy_from_slice(&(stream.len() as u64).to_le_bytes());
    key[24..].copy_from_slice(b"ctxeval1");
    let mut rng = ChaCha20Rng::from_seed(key);
    // Stream ids keep distinct index tuples apart even if `mix` collides.
    rng.set_stream(stream.iter().fold(0u64, |a, &s| a.wrapping_mul(1_000_003).wrapping_add(s)));
    rng
}

/// A seed for a sub-component, drawn from [`unit_rng`].
pub fn unit_seed(seed: u64, stream: &[u64]) -> u64 {
    unit_rng(seed, stream).gen()
}

/// Renders rows under a fixed header. Floats use the shortest
/// representation that reads back exactly.
pub fn to_csv<R, F>(header: &str, rows: &[R], mut fmt: F) -> String
where
    F: FnMut(&R) -> String,
{
    let mut out = String::new();
    let _ = writeln!(out, "{header}");
    for r in rows {
        let _ = writeln!(out, "{}", fmt(r));
    }
    out
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub(crate) fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}
