//! k-means with k-means++ seeding, the k sweep used to pick a model size,
//! and density pruning of rarely visited clusters.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use super::ModelError;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Independent k-means++ restarts; the lowest-inertia run wins.
    pub n_init: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self { max_iter: 300, n_init: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub ks: Vec<usize>,
    /// Stop when increasing k improves inertia by less than this fraction.
    pub eps1: f64,
    /// Drop clusters holding less than this fraction of samples.
    pub eps2: f64,
    pub seed: u64,
    pub kmeans: KMeansConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { ks: vec![5, 10, 15, 20, 25], eps1: 0.05, eps2: 0.025, seed: 0, kmeans: KMeansConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Inertia of `data` against fixed centroids.
pub fn inertia(data: &[Vec<f64>], centroids: &[Vec<f64>]) -> f64 {
    data.iter().map(|p| nearest(p, centroids).1).sum()
}

/// Greedy k-means++: each step draws `2 + ln k` candidates by D² weighting
/// and keeps the one that lowers the potential most.
fn plus_plus_init<R: Rng>(data: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = data.len();
    let trials = 2 + (k as f64).ln() as usize;
    let mut centroids = Vec::with_capacity(k);
    centroids.push(data[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = data.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let weights = if total > 0.0 { WeightedIndex::new(&d2).ok() } else { None };
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let idx = match &weights {
                Some(w) => w.sample(rng),
                None => rng.gen_range(0..n),
            };
            let cand: Vec<f64> = d2.iter().zip(data).map(|(&d, p)| d.min(sq_dist(p, &data[idx]))).collect();
            let pot: f64 = cand.iter().sum();
            if best.as_ref().map_or(true, |b| pot < b.0) {
                best = Some((pot, idx, cand));
            }
        }
        let (_, idx, cand) = best.expect("at least one trial");
        d2 = cand;
        centroids.push(data[idx].clone());
    }
    centroids
}

fn lloyd(data: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> Clustering {
    let (n, k, dim) = (data.len(), centroids.len(), data[0].len());
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iter {
        let mut changed = false;
        for (a, p) in assignments.iter_mut().zip(data) {
            let (c, _) = nearest(p, &centroids);
            if *a != c {
                *a = c;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(data) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Empty cluster: move it to the point worst served by the others.
                let far = (0..n)
                    .max_by(|&i, &j| {
                        nearest(&data[i], &centroids).1.total_cmp(&nearest(&data[j], &centroids).1).then(j.cmp(&i))
                    })
                    .unwrap();
                centroids[c] = data[far].clone();
                assignments[far] = c;
            } else {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    for (a, p) in assignments.iter_mut().zip(data) {
        *a = nearest(p, &centroids).0;
    }
    let inertia = inertia(data, &centroids);
    Clustering { centroids, assignments, inertia }
}

/// Best of `cfg.n_init` k-means++ runs. Deterministic in `seed`.
pub fn kmeans(data: &[Vec<f64>], k: usize, cfg: &KMeansConfig, seed: u64) -> Result<Clustering, ModelError> {
    if data.is_empty() || k == 0 || k > data.len() {
        return Err(ModelError::TooFewRows { rows: data.len(), needed: k.max(1) });
    }
    let runs: Vec<Clustering> = (0..cfg.n_init.max(1) as u64)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(run * 1000 + k as u64);
            let init = plus_plus_init(data, k, &mut rng);
            lloyd(data, init, cfg.max_iter)
        })
        .collect();
    Ok(runs.into_iter().reduce(|best, r| if r.inertia < best.inertia { r } else { best }).unwrap())
}

/// Outcome of the k sweep plus pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    /// (k, inertia) for every k that was run, in sweep order.
    pub sweep: Vec<(usize, f64)>,
    /// k chosen by the sweep, before pruning.
    pub k_swept: usize,
    /// Clustering at `k_swept`, before pruning.
    pub clustering: Clustering,
    /// Share of samples assigned to each cluster of `clustering`.
    pub fractions: Vec<f64>,
    /// Indices into `clustering.centroids` that survived pruning.
    pub retained: Vec<usize>,
}

impl ClusterFit {
    pub fn retained_centroids(&self) -> Vec<Vec<f64>> {
        self.retained.iter().map(|&i| self.clustering.centroids[i].clone()).collect()
    }
}

/// Runs k over `cfg.ks` in order. When moving to the next k improves
/// inertia by less than `eps1` (relative), the previous k is kept. Values
/// of k larger than the row count are skipped.
pub fn fit_clusters(data: &[Vec<f64>], cfg: &SweepConfig) -> Result<ClusterFit, ModelError> {
    let n = data.len();
    let mut ks: Vec<usize> = cfg.ks.iter().copied().filter(|&k| k >= 1 && k <= n).collect();
    if ks.is_empty() {
        if n == 0 {
            return Err(ModelError::TooFewRows { rows: 0, needed: 1 });
        }
        ks.push(n);
    }

    let mut sweep = Vec::new();
    let mut chosen: Option<Clustering> = None;
    for k in ks {
        let run = kmeans(data, k, &cfg.kmeans, cfg.seed)?;
        sweep.push((k, run.inertia));
        if let Some(prev) = &chosen {
            let improvement = if prev.inertia > 0.0 { (prev.inertia - run.inertia) / prev.inertia } else { 0.0 };
            if improvement < cfg.eps1 {
                break;
            }
        }
        chosen = Some(run);
    }
    let clustering = chosen.expect("at least one k was run");

    let k_swept = clustering.centroids.len();
    let mut counts = vec![0usize; k_swept];
    for &a in &clustering.assignments {
        counts[a] += 1;
    }
    let fractions: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut retained: Vec<usize> = (0..k_swept).filter(|&i| fractions[i] >= cfg.eps2).collect();
    if retained.is_empty() {
        // Only reachable with eps2 > 1/k; keep the densest cluster.
        let best = (0..k_swept).max_by(|&a, &b| counts[a].cmp(&counts[b]).then(b.cmp(&a))).unwrap();
        retained.push(best);
    }
    Ok(ClusterFit { sweep, k_swept, clustering, fractions, retained })
}
