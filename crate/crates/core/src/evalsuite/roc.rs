//! Robustness to modified fields, and genuine-versus-impostor separation,
//! on a prepared bank.

use rayon::prelude::*;

use super::{mean, median, unit_seed, BankUser, EvalError};
use crate::simgen::{perturb_sample, AdversarialEdit};

#[derive(Debug, Clone, PartialEq)]
pub struct RocConfig {
    pub n_list: Vec<usize>,
    /// Perturbed negatives per user and n.
    pub trials: usize,
    /// Positives per user: the training samples nearest their centroids.
    pub positives: usize,
    /// Spacing of the FPR grid the averaged curve is reported on.
    pub step: f64,
    pub seed: u64,
}

impl Default for RocConfig {
    fn default() -> Self {
        Self { n_list: vec![3, 5, 7, 9], trials: 1000, positives: 100, step: 0.001, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

impl RocPoint {
    pub const CSV_HEADER: &'static str = "threshold,fpr,tpr";

    pub fn csv(&self) -> String {
        format!("{},{},{}", self.threshold, self.fpr, self.tpr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocReport {
    pub n: usize,
    /// Users' curves averaged vertically (see [`vertical_average`]).
    pub curve: Vec<RocPoint>,
    /// Mean over users of the per-user AUC.
    pub auc: f64,
    pub per_user_auc: Vec<f64>,
    /// Users that had fewer training samples than requested positives.
    pub short_users: Vec<usize>,
}

impl RocReport {
    /// Highest TPR on the curve among points with FPR at most `max_fpr`.
    pub fn tpr_at(&self, max_fpr: f64) -> f64 {
        self.curve.iter().filter(|p| p.fpr <= max_fpr).map(|p| p.tpr).fold(0.0, f64::max)
    }
}

/// Exact ROC of "accept when S ≥ threshold", one point per distinct score
/// plus a reject-all point, ordered by decreasing threshold.
pub fn roc_points(pos: &[f64], neg: &[f64]) -> Vec<RocPoint> {
    let mut p = pos.to_vec();
    let mut n = neg.to_vec();
    p.sort_by(f64::total_cmp);
    n.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = p.iter().chain(&n).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let above = |v: &[f64], t: f64| (v.len() - v.partition_point(|&x| x < t)) as f64 / v.len() as f64;
    std::iter::once(RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 })
        .chain(thresholds.into_iter().map(|t| RocPoint { threshold: t, fpr: above(&n, t), tpr: above(&p, t) }))
        .collect()
}

/// Vertical average of several ROC curves on an FPR grid of spacing
/// `step`: at each grid FPR, the mean over curves of the best TPR reachable
/// without exceeding it. The threshold column is the mean threshold that
/// attains those points (infinite thresholds count as 1).
pub fn vertical_average(curves: &[Vec<RocPoint>], step: f64) -> Vec<RocPoint> {
    let steps = (1.0 / step).round() as usize;
    (0..=steps)
        .map(|i| {
            let f = i as f64 / steps as f64;
            let mut tpr = 0.0;
            let mut thr = 0.0;
            for c in curves {
                let best = c
                    .iter()
                    .filter(|p| p.fpr <= f + 1e-12)
                    .max_by(|a, b| a.tpr.total_cmp(&b.tpr).then(b.threshold.total_cmp(&a.threshold)))
                    .expect("curves start at the reject-all point");
                tpr += best.tpr;
                thr += best.threshold.min(1.0);
            }
            let k = curves.len() as f64;
            RocPoint { threshold: thr / k, fpr: f, tpr: tpr / k }
        })
        .collect()
}

/// Probability that a random positive outscores a random negative, ties
/// counting half.
pub fn mann_whitney_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut n = neg.to_vec();
    n.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for &p in pos {
        let below = n.partition_point(|&x| x < p);
        let not_above = n.partition_point(|&x| x <= p);
        total += below as f64 + 0.5 * (not_above - below) as f64;
    }
    total / (pos.len() as f64 * n.len() as f64)
}

struct UserRoc {
    curve: Vec<RocPoint>,
    auc: f64,
    short: bool,
}

fn user_roc(u: &BankUser, ui: usize, n: usize, cfg: &RocConfig) -> Result<UserRoc, EvalError> {
    let mut ranked: Vec<(f64, usize)> = u
        .train
        .iter()
        .enumerate()
        .map(|(i, s)| Ok((u.model.distance(s)?, i)))
        .collect::<Result<_, EvalError>>()?;
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let short = ranked.len() < cfg.positives;
    let positives: Vec<usize> = ranked.iter().take(cfg.positives).map(|r| r.1).collect();

    let pos_scores: Vec<f64> =
        positives.iter().map(|&i| Ok(u.model.score(&u.train[i])?.0)).collect::<Result<_, EvalError>>()?;
    let neg_scores: Vec<f64> = (0..cfg.trials as u64)
        .map(|t| {
            let src = &u.train[positives[t as usize % positives.len()]];
            let tag = [20, ui as u64, n as u64, t];
            let edit = AdversarialEdit::new(n, unit_seed(cfg.seed, &tag));
            let forged = perturb_sample(src, &edit, unit_seed(cfg.seed, &[21, ui as u64, n as u64, t]))?;
            Ok(u.model.score(&forged)?.0)
        })
        .collect::<Result<_, EvalError>>()?;
    Ok(UserRoc { curve: roc_points(&pos_scores, &neg_scores), auc: mann_whitney_auc(&pos_scores, &neg_scores), short })
}

pub fn run_robustness_roc(users: &[BankUser], cfg: &RocConfig) -> Result<Vec<RocReport>, EvalError> {
    if users.is_empty() || cfg.trials == 0 || cfg.positives == 0 || !(cfg.step > 0.0 && cfg.step <= 1.0) {
        return Err(EvalError::Config("ROC study needs users, trials, positives and a step in (0, 1]".into()));
    }
    cfg.n_list
        .iter()
        .map(|&n| {
            let per_user: Vec<UserRoc> = users
                .par_iter()
                .enumerate()
                .map(|(ui, u)| user_roc(u, ui, n, cfg))
                .collect::<Result<_, _>>()?;
            let curves: Vec<Vec<RocPoint>> = per_user.iter().map(|r| r.curve.clone()).collect();
            let curve = vertical_average(&curves, cfg.step);
            let per_user_auc: Vec<f64> = per_user.iter().map(|r| r.auc).collect();
            Ok(RocReport {
                n,
                curve,
                auc: mean(&per_user_auc),
                per_user_auc,
                short_users: per_user.iter().enumerate().filter(|(_, r)| r.short).map(|(i, _)| i).collect(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationRow {
    pub user: String,
    pub genuine_median: f64,
    pub impostor_median: f64,
}

impl SeparationRow {
    pub fn gap(&self) -> f64 {
        self.genuine_median - self.impostor_median
    }
}

/// Scores each user's held-out week against their own model (genuine) and
/// every other user's held-out week against it (impostor).
pub fn run_separation(users: &[BankUser]) -> Result<Vec<SeparationRow>, EvalError> {
    users
        .par_iter()
        .enumerate()
        .map(|(i, u)| {
            let genuine: Vec<f64> =
                u.holdout.iter().map(|s| Ok(u.model.score(s)?.0)).collect::<Result<_, EvalError>>()?;
            let impostor: Vec<f64> = users
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, o)| o.holdout.iter())
                .map(|s| Ok(u.model.score(s)?.0))
                .collect::<Result<_, EvalError>>()?;
            Ok(SeparationRow {
                user: u.profile.name.clone(),
                genuine_median: median(&genuine),
                impostor_median: median(&impostor),
            })
        })
        .collect()
}
