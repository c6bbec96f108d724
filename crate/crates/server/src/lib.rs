//! Authentication service. Receives sealed samples, keeps a per-user
//! append-only log, fits and refreshes models, and answers score queries
//! over a small framed protocol (see [`wire`]).

pub mod config;
pub mod net;
mod service;
mod store;
pub mod wire;

pub use config::{ConfigError, ServerConfig};
pub use net::{serve, Client, ClientError};
pub use service::{load_private_key, system_clock, Clock, EnrollReport, RefreshReport, Service, ServiceError, UserStatus};
pub use store::{Store, StoreError};
pub use wire::{MessageType, Request, Response, Status};
