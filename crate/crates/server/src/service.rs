//! Request handling on top of the store.

use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use ctxauth_core::authmodel::{refresh_model, ModelConfig, ModelError, SweepConfig, UserModel};
use ctxauth_core::protect::{hmac_sha256, open_envelope, Envelope, EnvelopeError, ProtectedSample, UserId};
use log::{info, warn};
use rsa::pkcs8::DecodePrivateKey;
use rsa::RsaPrivateKey;
use thiserror::Error;

use crate::config::ServerConfig;
use crate::store::{Store, StoreError, UserSlot};
use crate::wire::{MessageType, Request, Response, Status};

const WEEK_S: i64 = 7 * 24 * 3600;

/// Source of "now" in Unix seconds, for the skew check.
pub type Clock = Arc<dyn Fn() -> i64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64))
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("ciphertext failed authentication")]
    Integrity,
    #[error("message key could not be unwrapped")]
    Unwrap,
    #[error("timestamp {timestamp} is not after last seen {last_seen}")]
    Replay { timestamp: i64, last_seen: i64 },
    #[error("timestamp {timestamp} is {skew} s from server time, window is {window} s")]
    Skew { timestamp: i64, skew: i64, window: u64 },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("not ready: {0}")]
    NotReady(String),
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn status(&self) -> Status {
        match self {
            Self::Integrity => Status::Integrity,
            Self::Unwrap => Status::Unwrap,
            Self::Replay { .. } => Status::Replay,
            Self::Skew { .. } => Status::Skew,
            Self::Malformed(_) => Status::Malformed,
            Self::NotReady(_) => Status::NotReady,
            Self::UnknownUser(_) => Status::UnknownUser,
            Self::BadRequest(_) => Status::BadRequest,
            Self::Internal(_) => Status::Internal,
        }
    }
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        Self::Internal(e.to_string())
    }
}

impl From<EnvelopeError> for ServiceError {
    fn from(e: EnvelopeError) -> Self {
        match e {
            EnvelopeError::Integrity => Self::Integrity,
            EnvelopeError::Unwrap => Self::Unwrap,
            EnvelopeError::Malformed(_) | EnvelopeError::Payload(_) => Self::Malformed(e.to_string()),
            EnvelopeError::Seal(m) => Self::Internal(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrollReport {
    pub k_selected: usize,
    pub clusters: usize,
    pub q: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefreshReport {
    pub adopted_new: bool,
    pub old_wins: usize,
    pub total: usize,
    /// Why no candidate was fitted, when the old model was kept for that reason.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserStatus {
    pub samples: usize,
    pub last_seen: Option<i64>,
    pub enrolled: bool,
    pub model_created_at: Option<i64>,
}

pub struct Service {
    cfg: ServerConfig,
    key: RsaPrivateKey,
    store: Store,
    clock: Clock,
}

impl Service {
    /// Loads the private key named in `cfg` and opens the store.
    pub fn open(cfg: ServerConfig) -> Result<Self, ServiceError> {
        let key = load_private_key(&cfg.private_key)?;
        Self::new(cfg, key, system_clock())
    }

    pub fn new(cfg: ServerConfig, key: RsaPrivateKey, clock: Clock) -> Result<Self, ServiceError> {
        let store = Store::open(&cfg.data_dir)?;
        Ok(Self { cfg, key, store, clock })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.cfg
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Model settings for `user`. Seeds derive from the configured seed and
    /// the user id, so refits on the same data give the same model.
    pub fn model_config(&self, user: &UserId) -> ModelConfig {
        let h = hmac_sha256(&self.cfg.seed.to_le_bytes(), &user.0);
        let word = |i: usize| u64::from_le_bytes(h[8 * i..8 * i + 8].try_into().unwrap());
        ModelConfig {
            min_samples: self.cfg.enrollment_floor,
            sweep: SweepConfig { seed: word(0), ..SweepConfig::default() },
            reference_seed: word(1),
        }
    }

    /// Opens, checks and stores one envelope. A rejected envelope leaves
    /// the store untouched.
    pub fn ingest(&self, envelope: &[u8]) -> Result<usize, ServiceError> {
        Ok(self.ingest_inner(envelope)?.2)
    }

    fn ingest_inner(&self, envelope: &[u8]) -> Result<(Arc<UserSlot>, ProtectedSample, usize), ServiceError> {
        let res = self.try_ingest(envelope);
        if let Err(e) = &res {
            warn!("ingest rejected ({}): {e}", e.status().name());
        }
        res
    }

    fn try_ingest(&self, envelope: &[u8]) -> Result<(Arc<UserSlot>, ProtectedSample, usize), ServiceError> {
        let env = Envelope::from_bytes(envelope)?;
        let sample = open_envelope(&env, &self.key)?;
        if self.cfg.skew_window_s > 0 {
            let skew = sample.timestamp.saturating_sub((self.clock)());
            if skew.unsigned_abs() > self.cfg.skew_window_s {
                return Err(ServiceError::Skew { timestamp: sample.timestamp, skew, window: self.cfg.skew_window_s });
            }
        }
        // Checked again under the lock; this only avoids creating a user
        // directory for a message that would be refused anyway.
        let slot = self.store.get_or_create(&sample.user_id)?;
        let mut log = slot.lock();
        if let Some(last) = log.last_seen() {
            if sample.timestamp <= last {
                return Err(ServiceError::Replay { timestamp: sample.timestamp, last_seen: last });
            }
        }
        log.append(sample.clone())?;
        let n = log.samples.len();
        drop(log);
        Ok((slot, sample, n))
    }

    /// Ingests, then scores against the current model. The sample stays
    /// logged even when the user is not enrolled yet.
    pub fn authenticate(&self, envelope: &[u8]) -> Result<f64, ServiceError> {
        let (slot, sample, _) = self.ingest_inner(envelope)?;
        let model = slot
            .model
            .load_full()
            .ok_or_else(|| ServiceError::NotReady(format!("user {} is not enrolled", sample.user_id)))?;
        score(&model, &sample)
    }

    /// Scores without storing. For callers that already hold a sample.
    pub fn score_sample(&self, sample: &ProtectedSample) -> Result<f64, ServiceError> {
        let slot = self.store.get(&sample.user_id).ok_or(ServiceError::UnknownUser(sample.user_id))?;
        let model = slot
            .model
            .load_full()
            .ok_or_else(|| ServiceError::NotReady(format!("user {} is not enrolled", sample.user_id)))?;
        score(&model, sample)
    }

    pub fn model(&self, user: &UserId) -> Option<Arc<UserModel>> {
        self.store.get(user).and_then(|s| s.model.load_full())
    }

    /// Fits a model on everything stored for `user` and makes it current.
    pub fn enroll(&self, user: &UserId) -> Result<EnrollReport, ServiceError> {
        let slot = self.store.get(user).ok_or(ServiceError::UnknownUser(*user))?;
        let log = slot.lock();
        let created_at = log.last_seen().unwrap_or(0);
        let model = match UserModel::fit(&log.samples, created_at, &self.model_config(user)) {
            Ok(m) => m,
            Err(ModelError::TooFewRows { rows, needed }) => {
                return Err(ServiceError::NotReady(format!("{rows} samples stored, {needed} needed")))
            }
            Err(e) => return Err(ServiceError::Internal(e.to_string())),
        };
        let report =
            EnrollReport { k_selected: model.k_selected, clusters: model.centroids.len(), q: model.q, samples: log.samples.len() };
        slot.install_model(model)?;
        info!("enrolled {user}: k={} clusters={}", report.k_selected, report.clusters);
        Ok(report)
    }

    /// Runs the refresh decision on the latest week of samples newer than
    /// the current model. The adopted model is persisted; the one it
    /// replaces is kept as the previous model.
    pub fn weekly_refresh(&self, user: &UserId) -> Result<RefreshReport, ServiceError> {
        let slot = self.store.get(user).ok_or(ServiceError::UnknownUser(*user))?;
        let log = slot.lock();
        let old = slot.model.load_full().ok_or_else(|| ServiceError::NotReady(format!("user {user} is not enrolled")))?;
        let last = log.last_seen().unwrap_or(i64::MIN);
        let from = old.created_at.max(last.saturating_sub(WEEK_S));
        let week: Vec<ProtectedSample> = log.samples.iter().filter(|s| s.timestamp > from).cloned().collect();
        if week.is_empty() {
            return Err(ServiceError::NotReady("no samples newer than the current model".into()));
        }
        let out = refresh_model(&old, &week, last, &self.model_config(user)).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let report = RefreshReport {
            adopted_new: !out.retained_old,
            old_wins: out.old_wins,
            total: out.total,
            note: out.candidate_error.as_ref().map(|e| e.to_string()),
        };
        if !out.retained_old {
            slot.install_model(out.model)?;
        }
        if let Some(n) = &report.note {
            warn!("refresh of {user} kept the old model: {n}");
        } else {
            info!("refresh of {user}: old won {}/{}, adopted {}", out.old_wins, out.total, if report.adopted_new { "new" } else { "old" });
        }
        Ok(report)
    }

    pub fn status(&self, user: &UserId) -> Result<UserStatus, ServiceError> {
        let slot = self.store.get(user).ok_or(ServiceError::UnknownUser(*user))?;
        let log = slot.lock();
        let model = slot.model.load_full();
        Ok(UserStatus {
            samples: log.samples.len(),
            last_seen: log.last_seen(),
            enrolled: model.is_some(),
            model_created_at: model.map(|m| m.created_at),
        })
    }

    /// Answers one framed request.
    pub fn handle(&self, req: &Request) -> Response {
        match self.dispatch(req) {
            Ok(body) => Response::ok(body),
            Err(e) => Response::error(e.status(), e.to_string()),
        }
    }

    fn dispatch(&self, req: &Request) -> Result<String, ServiceError> {
        let kind = MessageType::from_u8(req.kind)
            .ok_or_else(|| ServiceError::BadRequest(format!("unknown message type {:#04x}", req.kind)))?;
        match kind {
            MessageType::Ingest => Ok(format!("samples={}", self.ingest(&req.payload)?)),
            MessageType::Authenticate => Ok(format!("score={}", self.authenticate(&req.payload)?)),
            MessageType::Enroll => {
                let r = self.enroll(&user_id(&req.payload)?)?;
                Ok(format!("k_selected={};clusters={};q={};samples={}", r.k_selected, r.clusters, r.q, r.samples))
            }
            MessageType::Refresh => {
                let r = self.weekly_refresh(&user_id(&req.payload)?)?;
                let mut body = format!(
                    "adopted={};old_wins={};total={}",
                    if r.adopted_new { "new" } else { "old" },
                    r.old_wins,
                    r.total
                );
                if let Some(n) = r.note {
                    body.push_str(&format!(";note={}", n.replace(';', ",")));
                }
                Ok(body)
            }
            MessageType::Status => {
                let s = self.status(&user_id(&req.payload)?)?;
                let opt = |v: Option<i64>| v.map_or_else(|| "-".to_string(), |v| v.to_string());
                Ok(format!(
                    "samples={};last_seen={};enrolled={};model_created_at={}",
                    s.samples,
                    opt(s.last_seen),
                    s.enrolled,
                    opt(s.model_created_at)
                ))
            }
        }
    }
}

fn score(model: &UserModel, s: &ProtectedSample) -> Result<f64, ServiceError> {
    model.score(s).map(|a| a.0).map_err(|e| ServiceError::Malformed(e.to_string()))
}

fn user_id(payload: &[u8]) -> Result<UserId, ServiceError> {
    let b: [u8; 16] = payload
        .try_into()
        .map_err(|_| ServiceError::BadRequest(format!("user id must be 16 bytes, got {}", payload.len())))?;
    Ok(UserId(b))
}

pub fn load_private_key(path: &Path) -> Result<RsaPrivateKey, ServiceError> {
    let pem = std::fs::read_to_string(path)
        .map_err(|e| ServiceError::Internal(format!("reading {}: {e}", path.display())))?;
    RsaPrivateKey::from_pkcs8_pem(&pem).map_err(|e| ServiceError::Internal(format!("{}: {e}", path.display())))
}
