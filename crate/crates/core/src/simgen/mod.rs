//! Synthetic users: seeded weekly traces over anchor places, and the
//! field-modification attack used in the robustness study.

mod bank;
mod perturb;
mod profile;
mod trace;

use thiserror::Error;

pub use bank::{default_bank, default_profile, DEFAULT_BANK_SIZE, MAX_SEPARATION_KM, MIN_SEPARATION_KM};
pub use perturb::{differing_modalities, perturb_sample, AdversarialEdit, Modality, PERTURBABLE_MODALITIES};
pub use profile::{
    AccessPoint, BluetoothDevice, CellEnvironment, Place, ProfileBank, UserProfile, WifiEnvironment, WifiNetwork,
    HOURS_PER_WEEK,
};
pub use trace::{generate_trace, generate_trace_labeled, records_to_debug_csv, Whereabouts, SAMPLE_INTERVAL_S};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("profile {user}: {msg}")]
    Profile { user: String, msg: String },
    #[error("sampling interval must be positive, got {0}")]
    Interval(i64),
    #[error("{requested} modalities requested, only {available} available")]
    TooManyFields { requested: usize, available: usize },
    #[error("profile file: {0}")]
    Config(String),
}
