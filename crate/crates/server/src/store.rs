//! On-disk layout, one directory per user:
//!
//! ```text
//! <data_dir>/users/<user hex>/samples.log     one sample text line per record, append-only
//! <data_dir>/users/<user hex>/model.txt       current model
//! <data_dir>/users/<user hex>/model.prev.txt  the model it replaced
//! ```
//!
//! Models are replaced by write-then-rename, so a crash leaves either the
//! old or the new document. A log line cut short by a crash is dropped on
//! load.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};

use arc_swap::ArcSwapOption;
use ctxauth_core::authmodel::{ModelError, UserModel};
use ctxauth_core::protect::{ProtectedSample, UserId};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path} line {line}: {msg}")]
    Corrupt { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Model { path: PathBuf, source: ModelError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Mutable per-user state, guarded by the user's lock.
#[derive(Debug)]
pub struct UserLog {
    pub samples: Vec<ProtectedSample>,
    log: File,
    log_path: PathBuf,
    len: u64,
}

impl UserLog {
    pub fn last_seen(&self) -> Option<i64> {
        self.samples.last().map(|s| s.timestamp)
    }

    /// Appends one sample. On a failed write the file is cut back so the
    /// log is unchanged.
    pub fn append(&mut self, s: ProtectedSample) -> Result<(), StoreError> {
        let mut line = s.to_text();
        line.push('\n');
        let res = self.log.write_all(line.as_bytes()).and_then(|_| self.log.sync_data());
        if let Err(e) = res {
            let _ = self.log.set_len(self.len);
            return Err(StoreError::Io { path: self.log_path.clone(), source: e });
        }
        self.len += line.len() as u64;
        self.samples.push(s);
        Ok(())
    }
}

#[derive(Debug)]
pub struct UserSlot {
    pub dir: PathBuf,
    log: Mutex<UserLog>,
    /// Published model; readers take a snapshot without the lock.
    pub model: ArcSwapOption<UserModel>,
}

impl UserSlot {
    pub fn lock(&self) -> MutexGuard<'_, UserLog> {
        // A panic mid-update cannot leave the log half-applied (see `append`).
        self.log.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Persists `m` as the current model, keeping the one it replaces as
    /// the previous model, then publishes it. Call with the lock held.
    pub fn install_model(&self, m: UserModel) -> Result<Arc<UserModel>, StoreError> {
        let cur = self.dir.join("model.txt");
        if cur.exists() {
            let prev_tmp = self.dir.join("model.prev.txt.tmp");
            fs::copy(&cur, &prev_tmp).map_err(io_err(&prev_tmp))?;
            let prev = self.dir.join("model.prev.txt");
            fs::rename(&prev_tmp, &prev).map_err(io_err(&prev))?;
        }
        write_atomic(&cur, m.to_text().as_bytes())?;
        let m = Arc::new(m);
        self.model.store(Some(m.clone()));
        Ok(m)
    }

    pub fn previous_model(&self) -> Result<Option<UserModel>, StoreError> {
        read_model(&self.dir.join("model.prev.txt"))
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("txt.tmp");
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn read_model(path: &Path) -> Result<Option<UserModel>, StoreError> {
    match fs::read_to_string(path) {
        Ok(text) => UserModel::from_text(&text)
            .map(Some)
            .map_err(|source| StoreError::Model { path: path.to_path_buf(), source }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(StoreError::Io { path: path.to_path_buf(), source: e }),
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    users: Mutex<HashMap<UserId, Arc<UserSlot>>>,
}

impl Store {
    /// Opens (creating if needed) the store under `data_dir` and loads every user.
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        let root = data_dir.join("users");
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let mut users = HashMap::new();
        for entry in fs::read_dir(&root).map_err(io_err(&root))? {
            let entry = entry.map_err(io_err(&root))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let Ok(user) = UserId::from_hex(&name) else { continue };
            users.insert(user, Arc::new(load_user(&entry.path())?));
        }
        Ok(Self { root, users: Mutex::new(users) })
    }

    pub fn get(&self, user: &UserId) -> Option<Arc<UserSlot>> {
        self.users.lock().unwrap_or_else(|p| p.into_inner()).get(user).cloned()
    }

    pub fn get_or_create(&self, user: &UserId) -> Result<Arc<UserSlot>, StoreError> {
        let mut users = self.users.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(s) = users.get(user) {
            return Ok(s.clone());
        }
        let dir = self.root.join(user.to_hex());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let slot = Arc::new(load_user(&dir)?);
        users.insert(*user, slot.clone());
        Ok(slot)
    }

    pub fn users(&self) -> Vec<UserId> {
        let mut v: Vec<UserId> = self.users.lock().unwrap_or_else(|p| p.into_inner()).keys().copied().collect();
        v.sort();
        v
    }

    pub fn user_dir(&self, user: &UserId) -> PathBuf {
        self.root.join(user.to_hex())
    }
}

fn load_user(dir: &Path) -> Result<UserSlot, StoreError> {
    let log_path = dir.join("samples.log");
    let mut text = match fs::read_to_string(&log_path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(StoreError::Io { path: log_path, source: e }),
    };
    // Drop a torn final line.
    let keep = text.rfind('\n').map_or(0, |i| i + 1);
    let torn = keep < text.len();
    text.truncate(keep);
    let mut samples: Vec<ProtectedSample> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let s = ProtectedSample::from_text(line).map_err(|e| StoreError::Corrupt {
            path: log_path.clone(),
            line: i + 1,
            msg: e.to_string(),
        })?;
        if samples.last().is_some_and(|p| p.timestamp >= s.timestamp) {
            return Err(StoreError::Corrupt { path: log_path, line: i + 1, msg: "timestamps not increasing".into() });
        }
        samples.push(s);
    }
    let log = OpenOptions::new().create(true).append(true).open(&log_path).map_err(io_err(&log_path))?;
    if torn {
        log.set_len(keep as u64).map_err(io_err(&log_path))?;
    }
    let model = read_model(&dir.join("model.txt"))?.map(Arc::new);
    Ok(UserSlot {
        dir: dir.to_path_buf(),
        log: Mutex::new(UserLog { samples, log, log_path, len: keep as u64 }),
        model: ArcSwapOption::new(model),
    })
}
