//! Feature extraction from protected samples.
//!
//! Column layout, left to right:
//!
//! 1. cosine estimates between the sample's location hash and each reference
//! 2. one block per categorical field, one column per enrollment vocabulary
//!    entry (multi-hot for list fields)
//! 3. the plain numeric fields
//!
//! All columns are then standardised with enrollment statistics.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::ModelError;
use crate::protect::{CategoricalField, Digest, PlainFields, ProtectedSample};
use crate::sblsh::{estimate_cosine, hamming, LshHash};

pub const REFERENCE_COUNT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub std: f64,
}

/// Everything needed to map a sample to a feature row, frozen at fit time.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub references: Vec<LshHash>,
    /// Per categorical field, sorted by digest bytes.
    pub vocab: Vec<Vec<Digest>>,
    pub columns: Vec<ColumnStats>,
}

impl FeatureSpec {
    pub fn width(&self) -> usize {
        self.references.len() + self.vocab.iter().map(Vec::len).sum::<usize>() + PlainFields::NAMES.len()
    }

    /// Fits references, vocabularies and standardisation on `samples`.
    pub fn fit(samples: &[ProtectedSample], seed: u64) -> Result<Self, ModelError> {
        if samples.is_empty() {
            return Err(ModelError::TooFewRows { rows: 0, needed: 1 });
        }
        let bits = samples[0].lsh.len();
        if let Some(s) = samples.iter().find(|s| s.lsh.len() != bits) {
            return Err(ModelError::Inconsistent(format!(
                "location hashes of length {bits} and {}",
                s.lsh.len()
            )));
        }
        let hashes: Vec<&LshHash> = samples.iter().map(|s| &s.lsh).collect();
        let references = hamming_medoids(&hashes, REFERENCE_COUNT, seed);

        let vocab = CategoricalField::ALL
            .iter()
            .map(|&f| {
                let mut v: Vec<Digest> = samples.iter().flat_map(|s| s.digests(f).iter().copied()).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();

        let mut spec = Self { references, vocab, columns: Vec::new() };
        let raw: Vec<Vec<Option<f64>>> = samples.iter().map(|s| spec.raw_row(s)).collect::<Result<_, _>>()?;
        spec.columns = (0..spec.width())
            .map(|j| {
                let present: Vec<f64> = raw.iter().filter_map(|r| r[j]).collect();
                column_stats(&present)
            })
            .collect();
        Ok(spec)
    }

    /// Unstandardised row; `None` marks an absent plain value.
    fn raw_row(&self, s: &ProtectedSample) -> Result<Vec<Option<f64>>, ModelError> {
        let mut row = Vec::with_capacity(self.width());
        for r in &self.references {
            let c = estimate_cosine(&s.lsh, r)?;
            row.push(Some(c));
        }
        for (field, vocab) in CategoricalField::ALL.iter().zip(&self.vocab) {
            let start = row.len();
            row.resize(start + vocab.len(), Some(0.0));
            // Digests never seen at enrollment leave the block at zero.
            for d in s.digests(*field) {
                if let Ok(i) = vocab.binary_search(d) {
                    row[start + i] = Some(1.0);
                }
            }
        }
        row.extend(s.plain.values());
        Ok(row)
    }

    pub fn extract(&self, s: &ProtectedSample) -> Result<Vec<f64>, ModelError> {
        if let Some(r) = self.references.first() {
            if r.len() != s.lsh.len() {
                return Err(ModelError::Inconsistent(format!(
                    "model expects {}-bit location hashes, sample has {}",
                    r.len(),
                    s.lsh.len()
                )));
            }
        }
        let raw = self.raw_row(s)?;
        Ok(raw
            .iter()
            .zip(&self.columns)
            .map(|(x, c)| match x {
                // Absent values are imputed at the column mean.
                None => 0.0,
                Some(_) if c.std == 0.0 => 0.0,
                Some(v) => (v - c.mean) / c.std,
            })
            .collect())
    }
}

pub fn extract_features(s: &ProtectedSample, spec: &FeatureSpec) -> Result<Vec<f64>, ModelError> {
    spec.extract(s)
}

/// Population mean and standard deviation; an empty column gets (0, 0).
fn column_stats(xs: &[f64]) -> ColumnStats {
    if xs.is_empty() {
        return ColumnStats { mean: 0.0, std: 0.0 };
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    // Rounding can leave a tiny nonzero spread on a constant column.
    let std = if std <= 1e-12 * mean.abs().max(1.0) { 0.0 } else { std };
    ColumnStats { mean, std }
}

/// k-medoids under Hamming distance with k-medoids++ seeding. Returns `k`
/// hashes, which repeat only when fewer than `k` distinct values exist.
pub fn hamming_medoids(hashes: &[&LshHash], k: usize, seed: u64) -> Vec<LshHash> {
    let n = hashes.len();
    let dist: Vec<u32> = {
        let mut d = vec![0u32; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let h = hamming(hashes[i], hashes[j]).expect("equal lengths checked") as u32;
                d[i * n + j] = h;
                d[j * n + i] = h;
            }
        }
        d
    };
    let at = |i: usize, j: usize| dist[i * n + j];

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut medoids = vec![rng.gen_range(0..n)];
    let mut nearest: Vec<u32> = (0..n).map(|i| at(i, medoids[0])).collect();
    while medoids.len() < k {
        let weights: Vec<f64> = nearest.iter().map(|&d| (d as f64) * (d as f64)).collect();
        let next = match WeightedIndex::new(&weights) {
            Ok(w) => w.sample(&mut rng),
            Err(_) => rng.gen_range(0..n),
        };
        for (slot, i) in nearest.iter_mut().zip(0..n) {
            *slot = (*slot).min(at(i, next));
        }
        medoids.push(next);
    }

    for _ in 0..100 {
        let assign: Vec<usize> = (0..n)
            .map(|i| (0..medoids.len()).min_by_key(|&m| (at(i, medoids[m]), m)).unwrap())
            .collect();
        let mut changed = false;
        for (m, medoid) in medoids.iter_mut().enumerate() {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == m).collect();
            if members.is_empty() {
                continue;
            }
            let cost = |c: usize| members.iter().map(|&i| at(i, c) as u64).sum::<u64>();
            let best = members.iter().copied().min_by_key(|&c| (cost(c), c != *medoid, c)).unwrap();
            if best != *medoid {
                *medoid = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    medoids.into_iter().map(|i| hashes[i].clone()).collect()
}
