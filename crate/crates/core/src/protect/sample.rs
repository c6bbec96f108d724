//! The protected sample and its canonical text encoding.
//!
//! A sample serialises to a single UTF-8 line of `field=value` pairs joined
//! by `;`, always in the same order:
//!
//! ```text
//! v=1;user=<32 hex>;ts=<i64>;lsh=<K>:<b64>;<categorical fields...>;wifi_rssi=<f64>;network_rssi=<f64>;time_of_day=<f64>
//! ```
//!
//! Categorical values are comma-joined base64 digests (possibly empty for
//! an empty list). Absent plain numbers are written as an empty value.

use std::fmt;
use std::str::FromStr;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;

use super::record::CategoricalField;
use super::ProtectError;
use crate::sblsh::LshHash;

pub const SAMPLE_FORMAT_VERSION: u32 = 1;

/// HMAC-SHA256 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest(pub [u8; 32]);

impl Digest {
    pub fn to_base64(&self) -> String {
        B64.encode(self.0)
    }

    pub fn from_base64(s: &str) -> Result<Self, ProtectError> {
        let bytes = B64.decode(s).map_err(|e| ProtectError::Format(format!("digest {s:?}: {e}")))?;
        let arr: [u8; 32] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| ProtectError::Format(format!("digest has {} bytes, expected 32", b.len())))?;
        Ok(Self(arr))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_base64())
    }
}

/// Anonymous 128-bit user token.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UserId(pub [u8; 16]);

impl UserId {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(s: &str) -> Result<Self, ProtectError> {
        if s.len() != 32 || !s.is_ascii() {
            return Err(ProtectError::Format(format!("user id {s:?} is not 32 hex digits")));
        }
        let mut out = [0u8; 16];
        for (i, o) in out.iter_mut().enumerate() {
            *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16)
                .map_err(|_| ProtectError::Format(format!("user id {s:?} is not hex")))?;
        }
        Ok(Self(out))
    }
}

impl fmt::Debug for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UserId({})", self.to_hex())
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for UserId {
    type Err = ProtectError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

/// Fields transmitted without transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlainFields {
    pub wifi_rssi: Option<f64>,
    pub network_rssi: Option<f64>,
    pub time_of_day: f64,
}

impl PlainFields {
    pub const NAMES: [&'static str; 3] = ["wifi_rssi", "network_rssi", "time_of_day"];

    pub fn values(&self) -> [Option<f64>; 3] {
        [self.wifi_rssi, self.network_rssi, Some(self.time_of_day)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtectedSample {
    pub user_id: UserId,
    pub timestamp: i64,
    pub lsh: LshHash,
    /// Indexed by [`CategoricalField::index`]. Scalar fields hold exactly one
    /// digest; list fields one digest per element, in input order.
    pub digests: Vec<Vec<Digest>>,
    pub plain: PlainFields,
}

impl ProtectedSample {
    pub fn digests(&self, field: CategoricalField) -> &[Digest] {
        &self.digests[field.index()]
    }

    pub fn to_text(&self) -> String {
        let mut parts = Vec::with_capacity(7 + CategoricalField::COUNT);
        parts.push(format!("v={SAMPLE_FORMAT_VERSION}"));
        parts.push(format!("user={}", self.user_id.to_hex()));
        parts.push(format!("ts={}", self.timestamp));
        parts.push(format!("lsh={}", self.lsh.to_wire()));
        for field in CategoricalField::ALL {
            let joined: Vec<String> = self.digests(field).iter().map(Digest::to_base64).collect();
            parts.push(format!("{}={}", field.name(), joined.join(",")));
        }
        for (name, value) in PlainFields::NAMES.iter().zip(self.plain.values()) {
            match value {
                Some(v) => parts.push(format!("{name}={v}")),
                None => parts.push(format!("{name}=")),
            }
        }
        parts.join(";")
    }

    pub fn from_text(line: &str) -> Result<Self, ProtectError> {
        let mut pairs = line.split(';').map(|p| {
            p.split_once('=')
                .ok_or_else(|| ProtectError::Format(format!("pair {p:?} has no '='")))
        });
        let mut expect = |key: &str| -> Result<&str, ProtectError> {
            let (k, v) = pairs
                .next()
                .ok_or_else(|| ProtectError::Format(format!("missing field {key}")))??;
            if k != key {
                return Err(ProtectError::Format(format!("expected field {key}, found {k}")));
            }
            Ok(v)
        };

        let version = expect("v")?;
        if version != SAMPLE_FORMAT_VERSION.to_string() {
            return Err(ProtectError::Format(format!("unsupported sample version {version}")));
        }
        let user_id = UserId::from_hex(expect("user")?)?;
        let ts = expect("ts")?;
        let timestamp = ts.parse().map_err(|_| ProtectError::Format(format!("bad timestamp {ts:?}")))?;
        let lsh = LshHash::from_wire(expect("lsh")?).map_err(|e| ProtectError::Format(e.to_string()))?;

        let mut digests = Vec::with_capacity(CategoricalField::COUNT);
        for field in CategoricalField::ALL {
            let v = expect(field.name())?;
            let list: Vec<Digest> = if v.is_empty() {
                Vec::new()
            } else {
                v.split(',').map(Digest::from_base64).collect::<Result<_, _>>()?
            };
            if !field.is_list() && list.len() != 1 {
                return Err(ProtectError::Format(format!("{} must hold one digest", field.name())));
            }
            digests.push(list);
        }

        let mut plain = [None; 3];
        for (slot, name) in plain.iter_mut().zip(PlainFields::NAMES) {
            let v = expect(name)?;
            if !v.is_empty() {
                let x: f64 = v.parse().map_err(|_| ProtectError::Format(format!("bad {name} {v:?}")))?;
                if !x.is_finite() {
                    return Err(ProtectError::Format(format!("{name} is not finite")));
                }
                *slot = Some(x);
            }
        }
        let time_of_day = plain[2].ok_or_else(|| ProtectError::Format("time_of_day is required".into()))?;
        if pairs.next().is_some() {
            return Err(ProtectError::Format("trailing fields".into()));
        }
        Ok(Self {
            user_id,
            timestamp,
            lsh,
            digests,
            plain: PlainFields { wifi_rssi: plain[0], network_rssi: plain[1], time_of_day },
        })
    }
}

impl fmt::Display for ProtectedSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for ProtectedSample {
    type Err = ProtectError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_text(s)
    }
}
