//! Protected training and held-out data for a bank of synthetic users.

use rayon::prelude::*;
use rsa::RsaPrivateKey;

use super::{unit_rng, unit_seed, EvalError};
use crate::authmodel::{ModelConfig, SweepConfig, UserModel};
use crate::protect::{ClientKeys, ProtectedSample};
use crate::simgen::{generate_trace, ProfileBank, UserProfile, HOURS_PER_WEEK, SAMPLE_INTERVAL_S};

#[derive(Debug, Clone, PartialEq)]
pub struct BankConfig {
    pub train_weeks: u32,
    pub holdout_weeks: u32,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self { train_weeks: 1, holdout_weeks: 1, seed: 0, model: ModelConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct BankUser {
    pub profile: UserProfile,
    pub keys: ClientKeys,
    pub train: Vec<ProtectedSample>,
    pub holdout: Vec<ProtectedSample>,
    pub model: UserModel,
}

/// Simulates, protects and enrols every user of `bank`.
pub fn prepare_bank(bank: &ProfileBank, cfg: &BankConfig) -> Result<Vec<BankUser>, EvalError> {
    // The server key only matters for sealing, which the experiments skip.
    let server = RsaPrivateKey::new(&mut unit_rng(cfg.seed, &[10]), 2048).map_err(|e| EvalError::Keys(e.to_string()))?;
    let server_pub = server.to_public_key();
    let per_week = (HOURS_PER_WEEK as i64 * 3600 / SAMPLE_INTERVAL_S) as usize;

    bank.users
        .par_iter()
        .enumerate()
        .map(|(i, profile)| {
            let i = i as u64;
            let keys = ClientKeys::generate(&mut unit_rng(cfg.seed, &[11, i]), server_pub.clone());
            let protector = keys.protector()?;
            let weeks = cfg.train_weeks + cfg.holdout_weeks;
            let trace = generate_trace(profile, weeks, SAMPLE_INTERVAL_S, unit_seed(cfg.seed, &[12, i]))?;
            let mut samples = trace.iter().map(|r| protector.protect_record(r)).collect::<Result<Vec<_>, _>>()?;
            let holdout = samples.split_off((cfg.train_weeks as usize * per_week).min(samples.len()));
            let model_cfg = ModelConfig {
                reference_seed: unit_seed(cfg.seed, &[13, i]),
                sweep: SweepConfig { seed: unit_seed(cfg.seed, &[14, i]), ..cfg.model.sweep.clone() },
                ..cfg.model.clone()
            };
            let model = UserModel::fit(&samples, profile.start_timestamp, &model_cfg)?;
            Ok(BankUser { profile: profile.clone(), keys, train: samples, holdout, model })
        })
        .collect()
}
