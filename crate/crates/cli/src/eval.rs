//! `ctxauth eval ...`: run an experiment, write its CSV, print a summary.

use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use ctxauth_core::evalsuite::*;
use ctxauth_core::geo::GeodeticCoord;

use crate::error::{write_text, CliError, Result};
use crate::load_bank;

#[derive(Subcommand)]
pub enum EvalCommand {
    /// Distance error against hash length K at a fixed distance.
    KSweep(KSweepArgs),
    /// Distance error statistics and histograms per distance at fixed K.
    DistErr(DistErrArgs),
    /// Two-anchor triangulation of a hidden point from its hash.
    Triangulate(TriangulateArgs),
    /// ROC of genuine samples against samples with n fields replaced.
    Roc(RocArgs),
}

#[derive(Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
pub struct KSweepArgs {
    /// Hash lengths, comma separated.
    #[arg(long = "K", value_delimiter = ',', default_values_t = DEFAULT_K_LIST.to_vec())]
    k: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 25.0)]
    distance_km: f64,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
pub struct DistErrArgs {
    /// Distances in km, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_DISTANCES_KM.to_vec())]
    distances: Vec<f64>,
    #[arg(long = "K", default_value_t = 4096)]
    k: usize,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
pub struct TriangulateArgs {
    /// First anchor as lat,lon in degrees.
    #[arg(long, default_value = "48.8584,2.2945")]
    a: String,
    #[arg(long, default_value = "48.8606,2.3376")]
    b: String,
    /// The hidden point.
    #[arg(long, default_value = "48.8530,2.3499")]
    target: String,
    #[arg(long = "K", default_value_t = 4096)]
    k: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Use true angles instead of hashes.
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
pub struct RocArgs {
    /// Profile bank (TOML). Without it the built-in bank is used.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    bank_seed: u64,
    /// Numbers of replaced fields, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![3, 5, 7, 9])]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    positives: usize,
    #[arg(long, default_value_t = 0.001)]
    step: f64,
    #[command(flatten)]
    common: Common,
}

fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Config(_) => CliError::input(e),
        _ => CliError::internal(e),
    }
}

fn coord(s: &str) -> Result<GeodeticCoord> {
    let bad = || CliError::input(format!("expected lat,lon in degrees, got {s:?}"));
    let (lat, lon) = s.split_once(',').ok_or_else(bad)?;
    let lat: f64 = lat.trim().parse().map_err(|_| bad())?;
    let lon: f64 = lon.trim().parse().map_err(|_| bad())?;
    GeodeticCoord::new(lat, lon, 0.0).map_err(CliError::input)
}

fn out(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    write_text(&p, text)?;
    println!("wrote {}", p.display());
    Ok(())
}

pub fn run(cmd: EvalCommand) -> Result<()> {
    match cmd {
        EvalCommand::KSweep(a) => {
            let cfg = KSweepConfig {
                pairs: a.pairs,
                distance_km: a.distance_km,
                ks: a.k,
                instances: a.instances,
                depth: a.depth,
                seed: a.common.seed,
            };
            let rows = run_k_sweep(&cfg).map_err(eval_err)?;
            println!("{:>8} {:>10} {:>10}", "K", "MAE km", "RMSE km");
            for r in &rows {
                println!("{:>8} {:>10.3} {:>10.3}", r.k, r.mae_km, r.rmse_km);
            }
            out(&a.common.out_dir, "k_sweep.csv", &to_csv(KSweepRow::CSV_HEADER, &rows, KSweepRow::csv))
        }
        EvalCommand::DistErr(a) => {
            let cfg = DistErrConfig {
                distances_km: a.distances,
                pairs: a.pairs,
                instances: a.instances,
                bits: a.k,
                depth: a.depth,
                seed: a.common.seed,
            };
            let res = run_distance_error_study(&cfg).map_err(eval_err)?;
            println!("{:>8} {:>9} {:>9} {:>9} {:>9}", "km", "MAE", "RMSE", "mean", "std");
            for (r, _) in &res {
                println!("{:>8} {:>9.3} {:>9.3} {:>9.3} {:>9.3}", r.distance_km, r.mae, r.rmse, r.mean, r.std);
            }
            let rows: Vec<DistErrRow> = res.iter().map(|(r, _)| *r).collect();
            out(&a.common.out_dir, "dist_err.csv", &to_csv(DistErrRow::CSV_HEADER, &rows, DistErrRow::csv))?;
            for (r, h) in &res {
                out(&a.common.out_dir, &format!("hist_{}.csv", r.distance_km), &h.to_csv())?;
            }
            Ok(())
        }
        EvalCommand::Triangulate(a) => {
            let cfg = TriangulationConfig { bits: a.k, depth: a.depth, trials: a.trials, seed: a.common.seed, exact: a.exact };
            let rep = run_triangulation_attack(&coord(&a.a)?, &coord(&a.b)?, &coord(&a.target)?, &cfg).map_err(eval_err)?;
            println!("trials={} adjusted={} mae_km={:.3} median_km={:.3}", rep.errors_km.len(), rep.adjusted, rep.mae_km, rep.median_km);
            let rows: Vec<(usize, f64)> = rep.errors_km.iter().copied().enumerate().collect();
            out(&a.common.out_dir, "triangulate.csv", &to_csv("trial,error_km", &rows, |(i, e)| format!("{i},{e}")))
        }
        EvalCommand::Roc(a) => {
            let bank = load_bank(a.profile.as_deref(), a.bank_seed)?;
            let users = prepare_bank(&bank, &BankConfig { seed: a.common.seed, ..BankConfig::default() }).map_err(eval_err)?;
            let cfg = RocConfig { n_list: a.n, trials: a.trials, positives: a.positives, step: a.step, seed: a.common.seed };
            let reports = run_robustness_roc(&users, &cfg).map_err(eval_err)?;
            println!("{:>3} {:>8} {:>14}", "n", "AUC", "TPR@FPR<=0.1");
            for r in &reports {
                println!("{:>3} {:>8.4} {:>14.4}", r.n, r.auc, r.tpr_at(0.1));
                out(&a.common.out_dir, &format!("roc_n{}.csv", r.n), &to_csv(RocPoint::CSV_HEADER, &r.curve, RocPoint::csv))?;
            }
            let sep = run_separation(&users).map_err(eval_err)?;
            out(
                &a.common.out_dir,
                "separation.csv",
                &to_csv("user,genuine_median,impostor_median", &sep, |s| {
                    format!("{},{},{}", s.user, s.genuine_median, s.impostor_median)
                }),
            )
        }
    }
}
