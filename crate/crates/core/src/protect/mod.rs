//! Client-side protection: location hashing of the numeric modalities, keyed
//! digests of the categorical ones, and the transport envelope.

mod envelope;
mod record;
mod sample;

use hmac::{Hmac, Mac};
use rand::{CryptoRng, Rng, RngCore};
use rsa::pkcs8::{DecodePublicKey, EncodePublicKey, LineEnding};
use rsa::RsaPublicKey;
use serde::{Deserialize, Serialize};
use sha2::Sha256;
use thiserror::Error;

pub use envelope::{open_envelope, seal_envelope, Envelope, EnvelopeError, MESSAGE_KEY_LEN, NONCE_LEN, TAG_LEN};
pub use record::{CategoricalField, ContextRecord};
pub use sample::{Digest, PlainFields, ProtectedSample, UserId, SAMPLE_FORMAT_VERSION};

use crate::geo::{barometric_altitude, geodetic_to_ecef, GeoError};
use crate::sblsh::{LshError, SblshDescriptor, SblshParams};

/// Length of the numeric vector fed to the location hash.
pub const NUMERIC_DIM: usize = 8;
pub const DEFAULT_LSH_BITS: usize = 4096;
pub const SALT_RANGE: std::ops::Range<f64> = 1e5..1e6;

#[derive(Debug, Error)]
pub enum ProtectError {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Lsh(#[from] LshError),
    #[error("malformed protected sample: {0}")]
    Format(String),
    #[error("invalid key material: {0}")]
    Keys(String),
}

/// Multipliers applied to the non-positional modalities before hashing.
/// ECEF components are used in meters as-is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorScaling {
    pub altitude: f64,
    pub noise: f64,
    pub field_strength: f64,
    pub inclination: f64,
}

impl Default for VectorScaling {
    fn default() -> Self {
        Self { altitude: 1e3, noise: 1e4, field_strength: 1e4, inclination: 1e4 }
    }
}

/// Long-lived per-installation secrets.
#[derive(Debug, Clone)]
pub struct ClientKeys {
    pub user_id: UserId,
    pub hmac_key: [u8; 16],
    pub salt: f64,
    pub lsh: SblshDescriptor,
    pub scaling: VectorScaling,
    pub server_pub: RsaPublicKey,
}

impl ClientKeys {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R, server_pub: RsaPublicKey) -> Self {
        let mut user_id = [0u8; 16];
        rng.fill_bytes(&mut user_id);
        let mut hmac_key = [0u8; 16];
        rng.fill_bytes(&mut hmac_key);
        Self {
            user_id: UserId(user_id),
            hmac_key,
            salt: rng.gen_range(SALT_RANGE),
            // Kept below 2^63: key files are TOML, whose integers are i64.
            lsh: SblshDescriptor::new(NUMERIC_DIM, DEFAULT_LSH_BITS, NUMERIC_DIM, rng.next_u64() >> 1),
            scaling: VectorScaling::default(),
            server_pub,
        }
    }

    /// Binds to a regenerated parameter set, ready for repeated use.
    pub fn protector(&self) -> Result<Protector<'_>, ProtectError> {
        Ok(Protector { keys: self, params: self.lsh.generate()? })
    }

    pub fn to_toml(&self) -> Result<String, ProtectError> {
        let file = KeyFile {
            user_id: self.user_id.to_hex(),
            hmac_key: self.hmac_key.iter().map(|b| format!("{b:02x}")).collect(),
            salt: self.salt,
            lsh: self.lsh,
            scaling: self.scaling,
            server_public_key: self
                .server_pub
                .to_public_key_pem(LineEnding::LF)
                .map_err(|e| ProtectError::Keys(e.to_string()))?,
        };
        toml::to_string(&file).map_err(|e| ProtectError::Keys(e.to_string()))
    }

    pub fn from_toml(s: &str) -> Result<Self, ProtectError> {
        let file: KeyFile = toml::from_str(s).map_err(|e| ProtectError::Keys(e.to_string()))?;
        // Same shape as a user id: 16 bytes as 32 hex digits.
        let key = UserId::from_hex(&file.hmac_key).map_err(|_| ProtectError::Keys("hmac_key must be 32 hex digits".into()))?;
        if !SALT_RANGE.contains(&file.salt) {
            return Err(ProtectError::Keys(format!("salt {} outside [1e5, 1e6)", file.salt)));
        }
        if file.lsh.dim != NUMERIC_DIM {
            return Err(ProtectError::Keys(format!("lsh.dim must be {NUMERIC_DIM}")));
        }
        Ok(Self {
            user_id: UserId::from_hex(&file.user_id)?,
            hmac_key: key.0,
            salt: file.salt,
            lsh: file.lsh,
            scaling: file.scaling,
            server_pub: RsaPublicKey::from_public_key_pem(&file.server_public_key)
                .map_err(|e| ProtectError::Keys(e.to_string()))?,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct KeyFile {
    user_id: String,
    hmac_key: String,
    salt: f64,
    server_public_key: String,
    lsh: SblshDescriptor,
    scaling: VectorScaling,
}

/// Builds the 8-component vector that gets location-hashed.
pub fn assemble_numeric_vector(
    r: &ContextRecord,
    salt: f64,
    scaling: &VectorScaling,
) -> Result<[f64; NUMERIC_DIM], GeoError> {
    let p = geodetic_to_ecef(&r.position);
    let altitude = barometric_altitude(r.pressure, r.ref_pressure, r.ref_temp)?;
    Ok([
        p.x,
        p.y,
        p.z,
        altitude * scaling.altitude,
        r.noise_level * scaling.noise,
        r.mag_field_strength * scaling.field_strength,
        r.mag_inclination * scaling.inclination,
        salt,
    ])
}

pub fn hmac_sha256(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(message);
    mac.finalize().into_bytes().into()
}

/// Token standing in for an unavailable modality. The NUL bytes keep it
/// outside the space of real sensor strings.
pub fn absent_token(field: CategoricalField) -> String {
    format!("\0absent\0{}", field.name())
}

/// Protection pipeline bound to one installation's keys.
pub struct Protector<'k> {
    keys: &'k ClientKeys,
    params: SblshParams,
}

impl Protector<'_> {
    pub fn keys(&self) -> &ClientKeys {
        self.keys
    }

    pub fn params(&self) -> &SblshParams {
        &self.params
    }

    pub fn digest(&self, value: &str) -> Digest {
        Digest(hmac_sha256(&self.keys.hmac_key, value.as_bytes()))
    }

    pub fn protect_record(&self, r: &ContextRecord) -> Result<ProtectedSample, ProtectError> {
        let x = assemble_numeric_vector(r, self.keys.salt, &self.keys.scaling)?;
        let lsh = self.params.hash(&x)?;
        let digests = CategoricalField::ALL
            .iter()
            .map(|&field| match r.categorical(field) {
                Some(values) => values.into_iter().map(|v| self.digest(v)).collect(),
                None => vec![self.digest(&absent_token(field))],
            })
            .collect();
        Ok(ProtectedSample {
            user_id: self.keys.user_id,
            timestamp: r.timestamp,
            lsh,
            digests,
            plain: PlainFields { wifi_rssi: r.wifi_rssi, network_rssi: r.network_rssi, time_of_day: r.time_of_day },
        })
    }
}

/// One-shot convenience; regenerates the hash parameters on every call.
pub fn protect_record(r: &ContextRecord, keys: &ClientKeys) -> Result<ProtectedSample, ProtectError> {
    keys.protector()?.protect_record(r)
}
