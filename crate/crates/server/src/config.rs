//! Server configuration: a TOML file, then `CTXAUTH_*` environment overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("environment variable {var}: {msg}")]
    Env { var: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub data_dir: PathBuf,
    pub host: String,
    pub port: u16,
    /// PKCS#8 PEM private key.
    pub private_key: PathBuf,
    /// Largest accepted |now - timestamp| in seconds. 0 disables the check.
    pub skew_window_s: u64,
    pub enrollment_floor: usize,
    /// Root of the per-user model seeds.
    pub seed: u64,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("ctxauth-data"),
            host: "127.0.0.1".into(),
            port: 7430,
            private_key: PathBuf::from("server_key.pem"),
            skew_window_s: 600,
            enrollment_floor: ctxauth_core::authmodel::ENROLLMENT_FLOOR,
            seed: 0,
        }
    }
}

impl ServerConfig {
    pub fn from_toml(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    /// Applies `CTXAUTH_DATA_DIR`, `CTXAUTH_HOST`, `CTXAUTH_PORT`,
    /// `CTXAUTH_PRIVATE_KEY`, `CTXAUTH_SKEW_WINDOW_S`,
    /// `CTXAUTH_ENROLLMENT_FLOOR` and `CTXAUTH_SEED`. Other variables are ignored.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        fn num<T: std::str::FromStr>(var: &str, v: &str) -> Result<T, ConfigError> {
            v.trim().parse().map_err(|_| ConfigError::Env { var: var.into(), msg: format!("cannot parse {v:?}") })
        }
        for (k, v) in vars {
            match k.as_str() {
                "CTXAUTH_DATA_DIR" => self.data_dir = v.into(),
                "CTXAUTH_HOST" => self.host = v,
                "CTXAUTH_PORT" => self.port = num(&k, &v)?,
                "CTXAUTH_PRIVATE_KEY" => self.private_key = v.into(),
                "CTXAUTH_SKEW_WINDOW_S" => self.skew_window_s = num(&k, &v)?,
                "CTXAUTH_ENROLLMENT_FLOOR" => self.enrollment_floor = num(&k, &v)?,
                "CTXAUTH_SEED" => self.seed = num(&k, &v)?,
                _ => {}
            }
        }
        Ok(())
    }

    pub fn addr(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}
