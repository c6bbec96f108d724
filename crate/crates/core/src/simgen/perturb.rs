//! Adversarial modification of protected samples: a chosen number of
//! modalities are overwritten with random values of the same shape.

use rand::seq::index::sample;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::SimError;
use crate::protect::{CategoricalField, Digest, ProtectedSample};
use crate::sblsh::LshHash;

/// A protected modality that an attacker can overwrite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    LocationHash,
    Categorical(CategoricalField),
}

impl Modality {
    /// The location hash followed by every categorical field.
    pub fn all() -> Vec<Modality> {
        std::iter::once(Modality::LocationHash)
            .chain(CategoricalField::ALL.iter().map(|&f| Modality::Categorical(f)))
            .collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::LocationHash => "location_hash",
            Modality::Categorical(f) => f.name(),
        }
    }
}

pub const PERTURBABLE_MODALITIES: usize = 1 + CategoricalField::COUNT;

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialEdit {
    pub n_fields: usize,
    /// Seeds which modalities are chosen.
    pub selection_seed: u64,
    /// Candidates to choose from.
    pub pool: Vec<Modality>,
}

impl AdversarialEdit {
    pub fn new(n_fields: usize, selection_seed: u64) -> Self {
        Self { n_fields, selection_seed, pool: Modality::all() }
    }

    pub fn chosen(&self) -> Result<Vec<Modality>, SimError> {
        if self.n_fields > self.pool.len() {
            return Err(SimError::TooManyFields { requested: self.n_fields, available: self.pool.len() });
        }
        let mut rng = ChaCha20Rng::seed_from_u64(self.selection_seed);
        Ok(sample(&mut rng, self.pool.len(), self.n_fields).into_iter().map(|i| self.pool[i]).collect())
    }
}

fn random_digest<R: RngCore>(rng: &mut R) -> Digest {
    let mut d = [0u8; 32];
    rng.fill_bytes(&mut d);
    Digest(d)
}

/// Overwrites `edit.n_fields` modalities of `ps`. Digests become fresh
/// random 32-byte values (an empty list gains one random element so the
/// field still changes), and the location hash becomes a uniform random
/// string of the same bit length. Plain numbers are left alone.
pub fn perturb_sample(ps: &ProtectedSample, edit: &AdversarialEdit, seed: u64) -> Result<ProtectedSample, SimError> {
    let chosen = edit.chosen()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = ps.clone();
    for m in chosen {
        match m {
            Modality::LocationHash => {
                let bits: Vec<bool> = (0..ps.lsh.len()).map(|_| rng.gen()).collect();
                out.lsh = LshHash::from_bits(&bits);
            }
            Modality::Categorical(f) => {
                let slot = &mut out.digests[f.index()];
                let n = slot.len().max(1);
                *slot = (0..n).map(|_| random_digest(&mut rng)).collect();
            }
        }
    }
    Ok(out)
}

/// Modalities in which two samples differ.
pub fn differing_modalities(a: &ProtectedSample, b: &ProtectedSample) -> Vec<Modality> {
    Modality::all()
        .into_iter()
        .filter(|m| match m {
            Modality::LocationHash => a.lsh != b.lsh,
            Modality::Categorical(f) => a.digests(*f) != b.digests(*f),
        })
        .collect()
}
