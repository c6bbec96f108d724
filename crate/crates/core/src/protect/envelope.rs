//! Hybrid encryption of a protected sample for transport.
//!
//! Wire layout (all lengths big-endian):
//!
//! ```text
//! [u32 wrapped_key_len][wrapped_key][12-byte nonce][ciphertext || 16-byte tag]
//! ```
//!
//! The sample text is sealed with AES-256-GCM under a fresh message key,
//! and that key is wrapped with RSA-OAEP(SHA-256) for the server.

use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::{Aes256Gcm, Nonce};
use rand::{CryptoRng, RngCore};
use rsa::{Oaep, RsaPrivateKey, RsaPublicKey};
use sha2::Sha256;
use thiserror::Error;

use super::sample::ProtectedSample;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 16;
pub const MESSAGE_KEY_LEN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvelopeError {
    #[error("envelope framing is malformed: {0}")]
    Malformed(&'static str),
    #[error("message key could not be unwrapped")]
    Unwrap,
    #[error("ciphertext failed authentication")]
    Integrity,
    #[error("decrypted payload is not a valid sample: {0}")]
    Payload(String),
    #[error("encryption failed: {0}")]
    Seal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub wrapped_key: Vec<u8>,
    pub nonce: [u8; NONCE_LEN],
    /// AES-GCM output, tag appended.
    pub ciphertext: Vec<u8>,
}

impl Envelope {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.wrapped_key.len() + NONCE_LEN + self.ciphertext.len());
        out.extend_from_slice(&(self.wrapped_key.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.wrapped_key);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EnvelopeError> {
        if bytes.len() < 4 {
            return Err(EnvelopeError::Malformed("shorter than length prefix"));
        }
        let key_len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        let rest = &bytes[4..];
        if rest.len() < key_len + NONCE_LEN + TAG_LEN {
            return Err(EnvelopeError::Malformed("truncated"));
        }
        let (wrapped_key, rest) = rest.split_at(key_len);
        let (nonce, ciphertext) = rest.split_at(NONCE_LEN);
        Ok(Self {
            wrapped_key: wrapped_key.to_vec(),
            nonce: nonce.try_into().unwrap(),
            ciphertext: ciphertext.to_vec(),
        })
    }
}

pub fn seal_envelope<R: RngCore + CryptoRng>(
    sample: &ProtectedSample,
    server_pub: &RsaPublicKey,
    rng: &mut R,
) -> Result<Envelope, EnvelopeError> {
    let mut key = [0u8; MESSAGE_KEY_LEN];
    rng.fill_bytes(&mut key);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);

    let cipher = Aes256Gcm::new_from_slice(&key).expect("32-byte key");
    let ciphertext = cipher
        .encrypt(Nonce::from_slice(&nonce), sample.to_text().as_bytes())
        .map_err(|e| EnvelopeError::Seal(e.to_string()))?;
    let wrapped_key = server_pub
        .encrypt(rng, Oaep::new::<Sha256>(), &key)
        .map_err(|e| EnvelopeError::Seal(e.to_string()))?;
    Ok(Envelope { wrapped_key, nonce, ciphertext })
}

pub fn open_envelope(env: &Envelope, server_priv: &RsaPrivateKey) -> Result<ProtectedSample, EnvelopeError> {
    let key = server_priv
        .decrypt(Oaep::new::<Sha256>(), &env.wrapped_key)
        .map_err(|_| EnvelopeError::Unwrap)?;
    if key.len() != MESSAGE_KEY_LEN {
        return Err(EnvelopeError::Unwrap);
    }
    let cipher = Aes256Gcm::new_from_slice(&key).map_err(|_| EnvelopeError::Unwrap)?;
    let plain = cipher
        .decrypt(Nonce::from_slice(&env.nonce), env.ciphertext.as_slice())
        .map_err(|_| EnvelopeError::Integrity)?;
    let text = std::str::from_utf8(&plain).map_err(|e| EnvelopeError::Payload(e.to_string()))?;
    ProtectedSample::from_text(text).map_err(|e| EnvelopeError::Payload(e.to_string()))
}
