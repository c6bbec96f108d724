//! Super-Bit locality-sensitive hashing.
//!
//! Projection vectors are drawn from N(0, 1) and orthonormalised with
//! Gram-Schmidt in blocks of `depth` vectors. A hash bit is the sign of the
//! projection of the input onto one vector, so the Hamming distance between
//! two hashes estimates the angle between their inputs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geo::MEAN_EARTH_RADIUS_KM;

/// Squared norm below which a projected block vector counts as degenerate.
const DEGENERATE_NORM: f64 = 1e-12;
const MAX_BLOCK_ATTEMPTS: u64 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LshError {
    #[error("depth {depth} must be in 1..={dim}")]
    Depth { depth: usize, dim: usize },
    #[error("bit count {bits} must be positive (depth {depth})")]
    BitCount { bits: usize, depth: usize },
    #[error("input has {got} components, parameters expect {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("hash lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("malformed hash encoding: {0}")]
    Encoding(String),
    #[error("could not draw a non-degenerate block {0}")]
    Degenerate(usize),
}

/// Everything needed to regenerate a parameter set. This is what gets stored
/// or exchanged; projection vectors never leave the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SblshDescriptor {
    pub dim: usize,
    pub bits: usize,
    pub depth: usize,
    pub seed: u64,
}

impl SblshDescriptor {
    pub fn new(dim: usize, bits: usize, depth: usize, seed: u64) -> Self {
        Self { dim, bits, depth, seed }
    }

    pub fn generate(&self) -> Result<SblshParams, LshError> {
        SblshParams::generate(self.dim, self.bits, self.depth, self.seed)
    }
}

/// Projection vectors for one hash family, row-major `bits x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct SblshParams {
    desc: SblshDescriptor,
    vectors: Vec<f64>,
}

impl SblshParams {
    pub fn generate(dim: usize, bits: usize, depth: usize, seed: u64) -> Result<Self, LshError> {
        if depth == 0 || depth > dim {
            return Err(LshError::Depth { depth, dim });
        }
        if bits == 0 {
            return Err(LshError::BitCount { bits, depth });
        }
        // When depth does not divide bits the last block is a truncated
        // full block, so growing K never changes earlier vectors.
        let mut vectors = vec![0.0; bits * dim];
        let mut block_buf = vec![0.0; depth * dim];
        for (block, chunk) in vectors.chunks_mut(depth * dim).enumerate() {
            fill_block(&mut block_buf, dim, depth, seed, block as u64)?;
            chunk.copy_from_slice(&block_buf[..chunk.len()]);
        }
        Ok(Self { desc: SblshDescriptor { dim, bits, depth, seed }, vectors })
    }

    pub fn descriptor(&self) -> SblshDescriptor {
        self.desc
    }

    pub fn dim(&self) -> usize {
        self.desc.dim
    }

    pub fn bits(&self) -> usize {
        self.desc.bits
    }

    pub fn depth(&self) -> usize {
        self.desc.depth
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.desc.dim..(i + 1) * self.desc.dim]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[f64]> {
        self.vectors.chunks_exact(self.desc.dim)
    }

    /// Sign-projection hash of `x`. A zero projection maps to bit 1.
    pub fn hash(&self, x: &[f64]) -> Result<LshHash, LshError> {
        if x.len() != self.desc.dim {
            return Err(LshError::Dimension { got: x.len(), expected: self.desc.dim });
        }
        let mut h = LshHash::zeros(self.desc.bits);
        for (i, v) in self.vectors().enumerate() {
            let dot: f64 = v.iter().zip(x).map(|(a, b)| a * b).sum();
            if dot >= 0.0 {
                h.set(i, true);
            }
        }
        Ok(h)
    }
}

/// Per-block RNG keyed by (seed, block, attempt) so a resampled block does
/// not disturb any other block.
fn block_rng(seed: u64, block: u64, attempt: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&block.to_le_bytes());
    key[16..24].copy_from_slice(&attempt.to_le_bytes());
    key[24..].copy_from_slice(b"sblsh-v1");
    ChaCha20Rng::from_seed(key)
}

fn fill_block(out: &mut [f64], dim: usize, depth: usize, seed: u64, block: u64) -> Result<(), LshError> {
    'attempt: for attempt in 0..MAX_BLOCK_ATTEMPTS {
        let mut rng = block_rng(seed, block, attempt);
        for x in out.iter_mut() {
            *x = StandardNormal.sample(&mut rng);
        }
        // Modified Gram-Schmidt, re-orthogonalised once for stability.
        for i in 0..depth {
            for _pass in 0..2 {
                for j in 0..i {
                    let (head, tail) = out.split_at_mut(i * dim);
                    let prev = &head[j * dim..(j + 1) * dim];
                    let cur = &mut tail[..dim];
                    let proj: f64 = prev.iter().zip(cur.iter()).map(|(a, b)| a * b).sum();
                    for (c, p) in cur.iter_mut().zip(prev) {
                        *c -= proj * p;
                    }
                }
            }
            let cur = &mut out[i * dim..(i + 1) * dim];
            let norm2: f64 = cur.iter().map(|c| c * c).sum();
            if norm2 < DEGENERATE_NORM {
                continue 'attempt;
            }
            let norm = norm2.sqrt();
            cur.iter_mut().for_each(|c| *c /= norm);
        }
        return Ok(());
    }
    Err(LshError::Degenerate(block as usize))
}

/// A K-bit hash, packed most-significant-bit first.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LshHash {
    len: usize,
    bytes: Vec<u8>,
}

impl LshHash {
    pub fn zeros(len: usize) -> Self {
        Self { len, bytes: vec![0; len.div_ceil(8)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut h = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            h.set(i, b);
        }
        h
    }

    /// Wraps packed bytes. Padding bits past `len` must be zero.
    pub fn from_packed(len: usize, bytes: Vec<u8>) -> Result<Self, LshError> {
        if bytes.len() != len.div_ceil(8) {
            return Err(LshError::Encoding(format!("{} bytes cannot hold exactly {len} bits", bytes.len())));
        }
        if len % 8 != 0 {
            let pad_mask = 0xffu8 >> (len % 8);
            if bytes[bytes.len() - 1] & pad_mask != 0 {
                return Err(LshError::Encoding("non-zero padding bits".into()));
            }
        }
        Ok(Self { len, bytes })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn packed(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        self.bytes[i / 8] & (0x80 >> (i % 8)) != 0
    }

    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len);
        let mask = 0x80u8 >> (i % 8);
        if v {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        out.bytes.iter_mut().for_each(|b| *b = !*b);
        if self.len % 8 != 0 {
            let last = out.bytes.len() - 1;
            out.bytes[last] &= !(0xffu8 >> (self.len % 8));
        }
        out
    }

    /// Wire form: `<K>:<base64 of packed bits>`.
    pub fn to_wire(&self) -> String {
        format!("{}:{}", self.len, B64.encode(&self.bytes))
    }

    pub fn from_wire(s: &str) -> Result<Self, LshError> {
        let (k, b64) = s.split_once(':').ok_or_else(|| LshError::Encoding("missing ':'".into()))?;
        let len: usize = k.parse().map_err(|_| LshError::Encoding(format!("bad bit count {k:?}")))?;
        let bytes = B64.decode(b64).map_err(|e| LshError::Encoding(e.to_string()))?;
        Self::from_packed(len, bytes)
    }
}

impl fmt::Debug for LshHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LshHash({})", self.to_wire())
    }
}

impl fmt::Display for LshHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_wire())
    }
}

impl FromStr for LshHash {
    type Err = LshError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_wire(s)
    }
}

/// Number of differing bits.
pub fn hamming(a: &LshHash, b: &LshHash) -> Result<usize, LshError> {
    if a.len != b.len {
        return Err(LshError::LengthMismatch(a.len, b.len));
    }
    let mut chunks_a = a.bytes.chunks_exact(8);
    let mut chunks_b = b.bytes.chunks_exact(8);
    let mut count = 0u32;
    for (x, y) in (&mut chunks_a).zip(&mut chunks_b) {
        let x = u64::from_be_bytes(x.try_into().unwrap());
        let y = u64::from_be_bytes(y.try_into().unwrap());
        count += (x ^ y).count_ones();
    }
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        count += (x ^ y).count_ones();
    }
    Ok(count as usize)
}

/// Angle estimate π·d_H/K, in [0, π].
pub fn estimate_angle(a: &LshHash, b: &LshHash) -> Result<f64, LshError> {
    let d = hamming(a, b)?;
    Ok(PI * d as f64 / a.len as f64)
}

pub fn estimate_cosine(a: &LshHash, b: &LshHash) -> Result<f64, LshError> {
    Ok(estimate_angle(a, b)?.cos())
}

/// Chord distance (km) on the mean Earth sphere implied by the estimated angle.
pub fn estimate_chord_distance_km(a: &LshHash, b: &LshHash) -> Result<f64, LshError> {
    let theta = estimate_angle(a, b)?;
    Ok(2.0 * MEAN_EARTH_RADIUS_KM * (theta / 2.0).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn gram_check(p: &SblshParams) {
        let (dim, depth) = (p.dim(), p.depth());
        for block in 0..p.bits().div_ceil(depth) {
            let rows = depth.min(p.bits() - block * depth);
            for i in 0..rows {
                for j in 0..rows {
                    let a = p.vector(block * depth + i);
                    let b = p.vector(block * depth + j);
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - want).abs() <= 1e-9, "block {block} ({i},{j}) = {dot}");
                }
            }
        }
        assert_eq!(p.vectors().count(), p.bits());
        assert!(p.vectors().all(|v| v.len() == dim));
    }

    #[test]
    fn blocks_are_orthonormal() {
        gram_check(&SblshParams::generate(8, 4096, 8, 11).unwrap());
        gram_check(&SblshParams::generate(3, 4096, 3, 12).unwrap());
        gram_check(&SblshParams::generate(5, 60, 3, 13).unwrap());
        gram_check(&SblshParams::generate(8, 64, 1, 14).unwrap());
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = SblshParams::generate(8, 512, 8, 99).unwrap();
        let b = a.descriptor().generate().unwrap();
        assert_eq!(a, b);
        let c = SblshParams::generate(8, 512, 8, 100).unwrap();
        assert_ne!(a, c);
        // Changing K extends the family without disturbing existing blocks.
        let d = SblshParams::generate(8, 1024, 8, 99).unwrap();
        assert_eq!(a.vector(511), d.vector(511));
    }

    #[test]
    fn config_errors() {
        assert_eq!(SblshParams::generate(8, 0, 8, 1).unwrap_err(), LshError::BitCount { bits: 0, depth: 8 });
        let partial = SblshParams::generate(8, 100, 8, 1).unwrap();
        assert_eq!(partial.vector(99), SblshParams::generate(8, 104, 8, 1).unwrap().vector(99));
        assert_eq!(SblshParams::generate(3, 9, 4, 1).unwrap_err(), LshError::Depth { depth: 4, dim: 3 });
        assert!(SblshParams::generate(3, 0, 3, 1).is_err());
        let p = SblshParams::generate(3, 30, 3, 1).unwrap();
        assert_eq!(p.hash(&[1.0, 2.0]).unwrap_err(), LshError::Dimension { got: 2, expected: 3 });
    }

    #[test]
    fn hash_properties() {
        let p = SblshParams::generate(8, 1024, 8, 5).unwrap();
        let x = [0.3, -1.2, 4.0, 0.5, 0.01, -7.0, 2.2, 1.0];
        let h = p.hash(&x).unwrap();
        assert_eq!(h, p.hash(&x).unwrap());
        let scaled: Vec<f64> = x.iter().map(|v| v * 17.5).collect();
        assert_eq!(h, p.hash(&scaled).unwrap());
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(p.hash(&neg).unwrap(), h.complement());
        assert_eq!(hamming(&h, &h.complement()).unwrap(), 1024);
    }

    #[test]
    fn zero_projection_maps_to_one() {
        let p = SblshParams::generate(3, 30, 3, 2).unwrap();
        let h = p.hash(&[0.0, 0.0, 0.0]).unwrap();
        assert!((0..30).all(|i| h.get(i)));
    }

    #[test]
    fn estimators_at_extremes() {
        let p = SblshParams::generate(3, 300, 3, 3).unwrap();
        let h = p.hash(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(estimate_angle(&h, &h).unwrap(), 0.0);
        assert_eq!(estimate_cosine(&h, &h).unwrap(), 1.0);
        assert_eq!(estimate_chord_distance_km(&h, &h).unwrap(), 0.0);
        assert_eq!(estimate_angle(&h, &h.complement()).unwrap(), PI);
        let mut half = h.clone();
        for i in 0..150 {
            half.set(i, !half.get(i));
        }
        assert!(estimate_cosine(&h, &half).unwrap().abs() < 1e-15);
        let short = LshHash::zeros(128);
        assert_eq!(hamming(&h, &short).unwrap_err(), LshError::LengthMismatch(300, 128));
    }

    #[test]
    fn wire_format_is_msb_first() {
        let mut h = LshHash::zeros(12);
        h.set(0, true);
        h.set(9, true);
        assert_eq!(h.packed(), &[0x80, 0x40]);
        assert_eq!(h.to_wire(), "12:gEA=");
        assert_eq!(LshHash::from_wire("12:gEA=").unwrap(), h);
        assert!(LshHash::from_wire("12:gEE=").is_err(), "padding bit set");
        assert!(LshHash::from_wire("16:gEA").is_err());
        assert!(LshHash::from_wire("gEA=").is_err());
    }

    fn naive_hamming(a: &LshHash, b: &LshHash) -> usize {
        (0..a.len()).filter(|&i| a.get(i) != b.get(i)).count()
    }

    #[test]
    fn hamming_matches_naive_exhaustive_small() {
        // Every pair of 6-bit strings, plus every length up to 64 with a sweep of patterns.
        for x in 0u8..64 {
            for y in 0u8..64 {
                let a = LshHash::from_bits(&(0..6).map(|i| x >> i & 1 == 1).collect::<Vec<_>>());
                let b = LshHash::from_bits(&(0..6).map(|i| y >> i & 1 == 1).collect::<Vec<_>>());
                assert_eq!(hamming(&a, &b).unwrap(), naive_hamming(&a, &b));
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for len in 1..=64 {
            for _ in 0..50 {
                let a = LshHash::from_bits(&(0..len).map(|_| rng.gen()).collect::<Vec<bool>>());
                let b = LshHash::from_bits(&(0..len).map(|_| rng.gen()).collect::<Vec<bool>>());
                assert_eq!(hamming(&a, &b).unwrap(), naive_hamming(&a, &b));
            }
        }
    }

    proptest! {
        #[test]
        fn hamming_matches_naive_4096(seed in any::<u64>()) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let a = LshHash::from_bits(&(0..4096).map(|_| rng.gen()).collect::<Vec<bool>>());
            let b = LshHash::from_bits(&(0..4096).map(|_| rng.gen()).collect::<Vec<bool>>());
            let c = LshHash::from_bits(&(0..4096).map(|_| rng.gen()).collect::<Vec<bool>>());
            let ab = hamming(&a, &b).unwrap();
            prop_assert_eq!(ab, naive_hamming(&a, &b));
            prop_assert_eq!(ab, hamming(&b, &a).unwrap());
            prop_assert!(hamming(&a, &c).unwrap() <= ab + hamming(&b, &c).unwrap());
        }

        #[test]
        fn wire_round_trip(bits in prop::collection::vec(any::<bool>(), 1..300)) {
            let h = LshHash::from_bits(&bits);
            prop_assert_eq!(LshHash::from_wire(&h.to_wire()).unwrap(), h);
        }
    }
}
