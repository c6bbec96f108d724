//! Per-user authentication model: features, clustering, scoring and the
//! weekly refresh decision.

mod features;
mod kmeans;
mod persist;

use thiserror::Error;

pub use features::{extract_features, hamming_medoids, ColumnStats, FeatureSpec, REFERENCE_COUNT};
pub use kmeans::{fit_clusters, inertia, kmeans, sq_dist, ClusterFit, Clustering, KMeansConfig, SweepConfig};
pub use persist::MODEL_FORMAT_VERSION;

use crate::protect::ProtectedSample;
use crate::sblsh::LshError;

/// Fewest samples a user must contribute before a model is fitted.
pub const ENROLLMENT_FLOOR: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{rows} rows available, at least {needed} required")]
    TooFewRows { rows: usize, needed: usize },
    #[error("inconsistent samples: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Lsh(#[from] LshError),
    #[error("model document line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub min_samples: usize,
    pub sweep: SweepConfig,
    /// Seeds reference selection.
    pub reference_seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { min_samples: ENROLLMENT_FLOOR, sweep: SweepConfig::default(), reference_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    pub spec: FeatureSpec,
    /// Centroids that survived pruning.
    pub centroids: Vec<Vec<f64>>,
    /// Distance at which the score reaches zero.
    pub q: f64,
    pub created_at: i64,
    /// k chosen by the sweep, before pruning.
    pub k_selected: usize,
    /// (k, inertia) for each k the sweep ran.
    pub sweep: Vec<(usize, f64)>,
}

/// Score in [0, 1]; higher means closer to the user's usual context.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AuthScore(pub f64);

impl UserModel {
    pub fn fit(samples: &[ProtectedSample], created_at: i64, cfg: &ModelConfig) -> Result<Self, ModelError> {
        if samples.len() < cfg.min_samples {
            return Err(ModelError::TooFewRows { rows: samples.len(), needed: cfg.min_samples });
        }
        let spec = FeatureSpec::fit(samples, cfg.reference_seed)?;
        let rows: Vec<Vec<f64>> = samples.iter().map(|s| spec.extract(s)).collect::<Result<_, _>>()?;
        let fit = fit_clusters(&rows, &cfg.sweep)?;
        let centroids = fit.retained_centroids();
        let nearest: Vec<f64> = rows.iter().map(|r| nearest_distance(r, &centroids)).collect();
        Ok(Self { spec, q: threshold_q(&nearest), centroids, created_at, k_selected: fit.k_swept, sweep: fit.sweep })
    }

    pub fn distance(&self, s: &ProtectedSample) -> Result<f64, ModelError> {
        Ok(nearest_distance(&self.spec.extract(s)?, &self.centroids))
    }

    pub fn score(&self, s: &ProtectedSample) -> Result<AuthScore, ModelError> {
        Ok(AuthScore(score_from_distance(self.distance(s)?, self.q)))
    }
}

pub fn score(s: &ProtectedSample, model: &UserModel) -> Result<AuthScore, ModelError> {
    model.score(s)
}

fn nearest_distance(row: &[f64], centroids: &[Vec<f64>]) -> f64 {
    centroids.iter().map(|c| sq_dist(row, c)).fold(f64::INFINITY, f64::min).sqrt()
}

pub fn score_from_distance(d: f64, q: f64) -> f64 {
    (1.0 - d / q).clamp(0.0, 1.0)
}

/// Twice the 99th percentile (linear interpolation) of the enrollment
/// nearest-centroid distances. Falls back to 1 when that is not positive.
pub fn threshold_q(distances: &[f64]) -> f64 {
    let q = 2.0 * percentile(distances, 0.99);
    if q > 0.0 && q.is_finite() {
        q
    } else {
        1.0
    }
}

fn percentile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = p * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefreshOutcome {
    pub model: UserModel,
    pub retained_old: bool,
    /// Samples where the old model scored at least as high as the candidate.
    pub old_wins: usize,
    pub total: usize,
    /// Why no candidate was fitted, if one wasn't.
    pub candidate_error: Option<ModelError>,
}

/// The old model is kept when it wins (ties included) on at least
/// `RETAIN_NUM / RETAIN_DEN` of the week's samples.
pub const RETAIN_NUM: usize = 1;
pub const RETAIN_DEN: usize = 3;

/// Fits a candidate on `week` and keeps whichever model the week's data
/// favours. The old model is kept when no candidate can be fitted.
pub fn refresh_model(
    old: &UserModel,
    week: &[ProtectedSample],
    created_at: i64,
    cfg: &ModelConfig,
) -> Result<RefreshOutcome, ModelError> {
    let candidate = match UserModel::fit(week, created_at, cfg) {
        Ok(m) => m,
        Err(e) => {
            return Ok(RefreshOutcome {
                model: old.clone(),
                retained_old: true,
                old_wins: 0,
                total: week.len(),
                candidate_error: Some(e),
            })
        }
    };
    let mut old_wins = 0;
    for s in week {
        if old.score(s)?.0 >= candidate.score(s)?.0 {
            old_wins += 1;
        }
    }
    let retained_old = old_wins * RETAIN_DEN >= week.len() * RETAIN_NUM;
    Ok(RefreshOutcome {
        model: if retained_old { old.clone() } else { candidate },
        retained_old,
        old_wins,
        total: week.len(),
        candidate_error: None,
    })
}
