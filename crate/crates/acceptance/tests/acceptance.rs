//! Acceptance criteria 1-10. Each prints one `[PASS]` or `[FAIL]` line; the
//! process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::net::TcpListener;
use std::panic::{self, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::Instant;

use ctxauth_core::authmodel::{fit_clusters, SweepConfig};
use ctxauth_core::evalsuite::*;
use ctxauth_core::geo::{ecef_to_geodetic, geodetic_to_ecef, GeodeticCoord, EcefPoint, WGS84_A, WGS84_B};
use ctxauth_core::protect::{
    hmac_sha256, open_envelope, seal_envelope, CategoricalField, ClientKeys, ContextRecord, Envelope, ProtectedSample,
};
use ctxauth_core::sblsh::{estimate_angle, SblshParams};
use ctxauth_core::simgen::{default_bank, default_profile, generate_trace};
use ctxauth_server::{serve, Client, ServerConfig, Service, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rsa::pkcs8::DecodePrivateKey;
use rsa::RsaPrivateKey;

// Tolerances.
const TABLE_REL_TOL: f64 = 0.15;
const EXPERIMENT_SEED: u64 = 7;
const DISTANCE_MAX_S: f64 = 600.0;
const HIST_NOISE: f64 = 0.05;
const ESTIMATOR_SEEDS: u64 = 10_000;
const MEAN_SE: f64 = 3.0;
const VAR_SE: f64 = 2.0;
const GEO_EXACT_M: f64 = 1e-6;
const GEO_ORACLE_M: f64 = 1e-3;
const SEAL_ROUND_TRIPS: usize = 1000;
const CLUSTER_REL_TOL: f64 = 0.05;
const ORACLE_RESTARTS: u64 = 300;
const ROC_MIN_TPR: f64 = 0.9;
const ROC_MAX_FPR: f64 = 0.1;
const ROC_MAX_S: f64 = 900.0;
const SEPARATION_GAP: f64 = 0.1;

/// (K, MAE km, RMSE km) at 25 km.
const K_SWEEP_REFERENCE: [(usize, f64, f64); 8] = [
    (128, 41.908, 65.709),
    (256, 35.132, 44.051),
    (512, 26.654, 32.236),
    (1024, 17.655, 23.181),
    (2048, 13.355, 17.049),
    (4096, 9.785, 12.648),
    (8192, 7.568, 9.722),
    (16384, 6.160, 7.874),
];

/// (distance km, MAE, RMSE, mean, std) at K = 4096.
const DIST_ERR_REFERENCE: [(f64, f64, f64, f64, f64); 7] = [
    (5.0, 2.826, 3.266, -1.109, 3.804),
    (10.0, 3.908, 4.776, -1.645, 4.616),
    (25.0, 9.785, 12.648, -2.643, 12.344),
    (50.0, 14.779, 18.819, -4.683, 18.588),
    (100.0, 26.258, 33.389, -9.417, 29.975),
    (500.0, 100.980, 124.377, -51.619, 113.846),
    (1000.0, 181.192, 230.074, -96.341, 212.993),
];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(failures: Vec<String>, summary: String) -> Self {
        if failures.is_empty() {
            Outcome { pass: true, detail: summary }
        } else {
            Outcome { pass: false, detail: format!("{summary}; {}", failures.join("; ")) }
        }
    }
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs()
}

fn c1_k_sweep() -> Outcome {
    let t = Instant::now();
    let rows = run_k_sweep(&KSweepConfig { seed: EXPERIMENT_SEED, ..KSweepConfig::default() }).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let mut fails = Vec::new();
    for (row, &(k, mae, rmse)) in rows.iter().zip(&K_SWEEP_REFERENCE) {
        assert_eq!(row.k, k);
        if rel(row.mae_km, mae) > TABLE_REL_TOL {
            fails.push(format!("K={k} MAE {:.3} vs {mae} ({:+.1}%)", row.mae_km, 100.0 * (row.mae_km / mae - 1.0)));
        }
        if rel(row.rmse_km, rmse) > TABLE_REL_TOL {
            fails.push(format!("K={k} RMSE {:.3} vs {rmse} ({:+.1}%)", row.rmse_km, 100.0 * (row.rmse_km / rmse - 1.0)));
        }
    }
    if !rows.windows(2).all(|w| w[1].mae_km < w[0].mae_km) {
        fails.push("MAE not strictly decreasing in K".into());
    }
    if secs > DISTANCE_MAX_S {
        fails.push(format!("took {secs:.0} s"));
    }
    let maes: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.mae_km)).collect();
    Outcome::new(fails, format!("MAE [{}] km", maes.join(", ")))
}

struct DistStudy {
    rows: Vec<(DistErrRow, Histogram)>,
    secs: f64,
}

fn dist_study() -> &'static DistStudy {
    static S: OnceLock<DistStudy> = OnceLock::new();
    S.get_or_init(|| {
        let t = Instant::now();
        let rows = run_distance_error_study(&DistErrConfig { seed: EXPERIMENT_SEED, ..DistErrConfig::default() }).unwrap();
        DistStudy { rows, secs: t.elapsed().as_secs_f64() }
    })
}

fn c2_distance_error() -> Outcome {
    let s = dist_study();
    let mut fails = Vec::new();
    for ((row, _), &(d, mae, rmse, _, _)) in s.rows.iter().zip(&DIST_ERR_REFERENCE) {
        assert_eq!(row.distance_km, d);
        if rel(row.mae, mae) > TABLE_REL_TOL {
            fails.push(format!("{d} km MAE {:.3} vs {mae}", row.mae));
        }
        if rel(row.rmse, rmse) > TABLE_REL_TOL {
            fails.push(format!("{d} km RMSE {:.3} vs {rmse}", row.rmse));
        }
        if row.mean >= 0.0 {
            fails.push(format!("{d} km mean {:+.3} not negative", row.mean));
        }
    }
    let mono = s.rows.windows(2).all(|w| w[1].0.mae > w[0].0.mae && w[1].0.rmse > w[0].0.rmse);
    if !mono {
        fails.push("error magnitude not increasing with distance".into());
    }
    if s.secs > DISTANCE_MAX_S {
        fails.push(format!("took {:.0} s", s.secs));
    }
    let maes: Vec<String> = s.rows.iter().map(|(r, _)| format!("{:.2}", r.mae)).collect();
    Outcome::new(fails, format!("MAE [{}] km", maes.join(", ")))
}

/// Walking away from the tallest bin, no bin may rise above the lowest
/// bin seen so far by more than `noise` times the peak count.
fn unimodal(counts: &[u64], noise: f64) -> bool {
    let Some((mode, &peak)) = counts.iter().enumerate().max_by_key(|(_, &c)| c) else { return false };
    let tol = noise * peak as f64;
    let ok = |it: &mut dyn Iterator<Item = u64>| {
        let mut low = peak as f64;
        for c in it {
            let c = c as f64;
            if c > low + tol {
                return false;
            }
            low = low.min(c);
        }
        true
    };
    ok(&mut counts[mode + 1..].iter().copied()) && ok(&mut counts[..mode].iter().rev().copied())
}

fn c3_histogram_shape() -> Outcome {
    let s = dist_study();
    let mut fails = Vec::new();
    let mut notes = Vec::new();
    for d in [25.0, 50.0] {
        let (row, hist) = s.rows.iter().find(|(r, _)| r.distance_km == d).unwrap();
        let counts: Vec<u64> = hist.bins.iter().map(|b| b.1).collect();
        if !unimodal(&counts, HIST_NOISE) {
            fails.push(format!("{d} km histogram not unimodal"));
        }
        if row.mean >= 0.0 {
            fails.push(format!("{d} km mean {:+.3} not negative", row.mean));
        }
        if row.mean.abs() >= row.mae {
            fails.push(format!("{d} km |mean| {:.3} >= MAE {:.3}", row.mean.abs(), row.mae));
        }
        let empty = counts.iter().filter(|&&c| c == 0).count();
        notes.push(format!("{d} km: {empty} of {} bins empty, mean {:+.3}, MAE {:.3}", counts.len(), row.mean, row.mae));
    }
    Outcome::new(fails, notes.join(", "))
}

/// Mean, sample variance and the standard error of that variance, taken
/// from the fourth central moment since the estimates are discrete.
fn mean_var(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, var, ((m4 - var * var).max(0.0) / n).sqrt())
}

fn c4_estimator() -> Outcome {
    const DIM: usize = 8;
    const BITS: usize = 64;
    let mut rng = ChaCha20Rng::seed_from_u64(44);
    let mut fails = Vec::new();
    let mut worst_z: f64 = 0.0;
    let mut reduced = 0;
    // Location hashes compare nearby points, so the pairs cover acute angles.
    for i in 0..10 {
        let theta = 0.05 + (std::f64::consts::FRAC_PI_2 - 0.1) * i as f64 / 9.0;
        let (u, v) = pair_at_angle(&mut rng, DIM, theta);
        let est = |depth: usize| -> Vec<f64> {
            (0..ESTIMATOR_SEEDS)
                .into_par_iter()
                .map(|s| {
                    let p = SblshParams::generate(DIM, BITS, depth, s * 131 + depth as u64).unwrap();
                    estimate_angle(&p.hash(&u).unwrap(), &p.hash(&v).unwrap()).unwrap()
                })
                .collect()
        };
        let (m1, v1, se1) = mean_var(&est(1));
        let (m8, v8, se8) = mean_var(&est(8));
        let n = ESTIMATOR_SEEDS as f64;
        for (depth, m, v) in [(1, m1, v1), (8, m8, v8)] {
            let z = (m - theta).abs() / (v / n).sqrt();
            worst_z = worst_z.max(z);
            if z > MEAN_SE {
                fails.push(format!("pair {i} depth {depth}: mean {m:.4} vs {theta:.4} ({z:.1} SE)"));
            }
        }
        if v8 > v1 + VAR_SE * (se1 * se1 + se8 * se8).sqrt() {
            fails.push(format!("pair {i}: depth-8 variance {v8:.2e} > depth-1 {v1:.2e}"));
        }
        reduced += usize::from(v8 < v1);
    }
    Outcome::new(fails, format!("worst bias {worst_z:.2} SE; depth 8 lowered variance on {reduced}/10 pairs"))
}

fn pair_at_angle(rng: &mut ChaCha20Rng, dim: usize, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let gauss = |rng: &mut ChaCha20Rng| -> Vec<f64> { (0..dim).map(|_| rng.sample(StandardNormal)).collect() };
    let norm = |x: &[f64]| x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut u = gauss(rng);
    let nu = norm(&u);
    u.iter_mut().for_each(|a| *a /= nu);
    let mut w = gauss(rng);
    let d: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
    w.iter_mut().zip(&u).for_each(|(a, b)| *a -= d * b);
    let nw = norm(&w);
    w.iter_mut().for_each(|a| *a /= nw);
    let v = u.iter().zip(&w).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect();
    (u, v)
}

fn c5_geodesy() -> Outcome {
    let mut fails = Vec::new();
    let exact = [
        ((0.0, 0.0), [WGS84_A, 0.0, 0.0]),
        ((0.0, 90.0), [0.0, WGS84_A, 0.0]),
        ((90.0, 0.0), [0.0, 0.0, WGS84_B]),
        ((-90.0, 0.0), [0.0, 0.0, -WGS84_B]),
    ];
    for ((lat, lon), want) in exact {
        let got = geodetic_to_ecef(&GeodeticCoord::new(lat, lon, 0.0).unwrap()).to_array();
        let err = (0..3).map(|i| (got[i] - want[i]).abs()).fold(0.0, f64::max);
        if err > GEO_EXACT_M {
            fails.push(format!("({lat}, {lon}) off by {err:.2e} m"));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(55);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (lat, lon, alt) = (rng.gen_range(-90.0..=90.0), rng.gen_range(-180.0..180.0), rng.gen_range(-500.0..9000.0));
        let g = GeodeticCoord::new(lat, lon, alt).unwrap();
        let ours = geodetic_to_ecef(&g).to_array();
        let (x, y, z) = map_3d::geodetic2ecef(f64::to_radians(lat), f64::to_radians(lon), alt, map_3d::Ellipsoid::WGS84);
        let fwd = ((ours[0] - x).powi(2) + (ours[1] - y).powi(2) + (ours[2] - z).powi(2)).sqrt();
        // Oracle forward, ours back: compare in the ECEF frame of the original.
        let back = ecef_to_geodetic(&EcefPoint::new(x, y, z)).unwrap();
        let rb = geodetic_to_ecef(&back).to_array();
        let round = ((rb[0] - ours[0]).powi(2) + (rb[1] - ours[1]).powi(2) + (rb[2] - ours[2]).powi(2)).sqrt();
        // Ours forward, oracle back.
        let (olat, olon, oalt) = map_3d::ecef2geodetic(ours[0], ours[1], ours[2], map_3d::Ellipsoid::WGS84);
        let (ox, oy, oz) = map_3d::geodetic2ecef(olat, olon, oalt, map_3d::Ellipsoid::WGS84);
        let oround = ((ox - x).powi(2) + (oy - y).powi(2) + (oz - z).powi(2)).sqrt();
        let e = fwd.max(round).max(oround);
        worst = worst.max(e);
        if e > GEO_ORACLE_M {
            fails.push(format!("({lat:.4}, {lon:.4}, {alt:.1}) differs by {e:.2e} m"));
        }
    }
    Outcome::new(fails, format!("worst oracle difference {worst:.2e} m"))
}

fn server_key() -> RsaPrivateKey {
    RsaPrivateKey::from_pkcs8_pem(include_str!("data/server_key.pem")).unwrap()
}

fn hex(b: &[u8]) -> String {
    b.iter().map(|x| format!("{x:02x}")).collect()
}

fn c6_crypto() -> Outcome {
    let mut fails = Vec::new();
    let rfc4231: [(Vec<u8>, Vec<u8>, &str); 6] = [
        (vec![0x0b; 20], b"Hi There".to_vec(), "b0344c61d8db38535ca8afceaf0bf12b881dc200c9833da726e9376c2e32cff7"),
        (b"Jefe".to_vec(), b"what do ya want for nothing?".to_vec(), "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"),
        (vec![0xaa; 20], vec![0xdd; 50], "773ea91e36800e46854db8ebd09181a72959098b3ef8c122d9635514ced565fe"),
        ((1u8..=25).collect(), vec![0xcd; 50], "82558a389a443c0ea4cc819899f2083a85f0faa3e578f8077a2e3ff46729665b"),
        (
            vec![0xaa; 131],
            b"Test Using Larger Than Block-Size Key - Hash Key First".to_vec(),
            "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54",
        ),
        (
            vec![0xaa; 131],
            b"This is a test using a larger than block-size key and a larger than block-size data. The key needs to be hashed before being used by the HMAC algorithm.".to_vec(),
            "9b09ffa71b942fcb27635fbcd5b0e944bfdc63644f0713938a7f51535c3a35e2",
        ),
    ];
    for (i, (k, m, want)) in rfc4231.iter().enumerate() {
        if hex(&hmac_sha256(k, m)) != *want {
            fails.push(format!("RFC 4231 vector {i} mismatch"));
        }
    }
    // Case 5 truncates the output to 128 bits.
    if hex(&hmac_sha256(&[0x0c; 20], b"Test With Truncation")[..16]) != "a3b6167473100ee06e0c796c2955552b" {
        fails.push("RFC 4231 truncated vector mismatch".into());
    }

    let sk = server_key();
    let pk = sk.to_public_key();
    let bank = default_bank(2);
    let per_user = SEAL_ROUND_TRIPS / bank.users.len();
    let mut samples = Vec::with_capacity(SEAL_ROUND_TRIPS);
    for (i, p) in bank.users.iter().enumerate() {
        let keys = ClientKeys::generate(&mut ChaCha20Rng::seed_from_u64(600 + i as u64), pk.clone());
        let prot = keys.protector().unwrap();
        let trace = generate_trace(p, 1, 600, 60 + i as u64).unwrap();
        let step = trace.len() / per_user;
        samples.extend(trace.iter().step_by(step).take(per_user).map(|r| prot.protect_record(r).unwrap()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(66);
    let sealed: Vec<Vec<u8>> = samples.iter().map(|s| seal_envelope(s, &pk, &mut rng).unwrap().to_bytes()).collect();
    let bad_round_trips = samples
        .par_iter()
        .zip(&sealed)
        .filter(|(s, bytes)| {
            let env = Envelope::from_bytes(bytes).unwrap();
            env.to_bytes() != **bytes
                || open_envelope(&env, &sk).map(|o| o.to_text().into_bytes() != s.to_text().into_bytes()).unwrap_or(true)
        })
        .count();
    if bad_round_trips > 0 {
        fails.push(format!("{bad_round_trips} of {} round trips differ", samples.len()));
    }

    // Every single-bit flip of one envelope, framing and wrapped key included.
    let target = &sealed[0];
    let accepted: Vec<usize> = (0..target.len() * 8)
        .into_par_iter()
        .filter(|&bit| {
            let mut t = target.clone();
            t[bit / 8] ^= 1 << (bit % 8);
            Envelope::from_bytes(&t).and_then(|e| open_envelope(&e, &sk)).is_ok()
        })
        .collect();
    if !accepted.is_empty() {
        fails.push(format!("{} flipped bits accepted, first at bit {}", accepted.len(), accepted[0]));
    }
    Outcome::new(
        fails,
        format!("7 RFC vectors, {} round trips, {} single-bit flips rejected", samples.len(), target.len() * 8),
    )
}

// Independent k-means used as the clustering oracle: random-point starts,
// many restarts, plain Lloyd iterations.
fn oracle_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn oracle_kmeans(data: &[Vec<f64>], k: usize, restarts: u64, seed: u64) -> f64 {
    (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed ^ (r << 20));
            let mut idx: Vec<usize> = (0..data.len()).collect();
            for i in 0..k {
                let j = rng.gen_range(i..idx.len());
                idx.swap(i, j);
            }
            let mut cents: Vec<Vec<f64>> = idx[..k].iter().map(|&i| data[i].clone()).collect();
            let mut assign = vec![usize::MAX; data.len()];
            for _ in 0..500 {
                let mut changed = false;
                for (i, x) in data.iter().enumerate() {
                    let best = (0..k).min_by(|&a, &b| oracle_sq(x, &cents[a]).total_cmp(&oracle_sq(x, &cents[b]))).unwrap();
                    if assign[i] != best {
                        assign[i] = best;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
                for (c, cent) in cents.iter_mut().enumerate() {
                    let members: Vec<&Vec<f64>> = data.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(x, _)| x).collect();
                    if members.is_empty() {
                        continue;
                    }
                    for d in 0..cent.len() {
                        cent[d] = members.iter().map(|m| m[d]).sum::<f64>() / members.len() as f64;
                    }
                }
            }
            data.iter().map(|x| cents.iter().map(|c| oracle_sq(x, c)).fold(f64::INFINITY, f64::min)).sum::<f64>()
        })
        .reduce(|| f64::INFINITY, f64::min)
}

fn blobs(rng: &mut ChaCha20Rng, dim: usize, sizes: &[usize], spread: f64, std: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for &n in sizes {
        let c: Vec<f64> = (0..dim).map(|_| rng.gen_range(-spread..spread)).collect();
        for _ in 0..n {
            out.push(c.iter().map(|m| m + std * rng.sample::<f64, _>(StandardNormal)).collect());
        }
    }
    out
}

/// Clusters below eps2, recounted from the assignments.
fn expected_retained(assignments: &[usize], k: usize, eps2: f64) -> Vec<usize> {
    let n = assignments.len() as f64;
    (0..k).filter(|&c| assignments.iter().filter(|&&a| a == c).count() as f64 / n >= eps2).collect()
}

fn c7_clustering() -> Outcome {
    let mut fails = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(700 + i);
        let dim = 2 + (i as usize % 5);
        let groups = 3 + (i as usize % 6);
        let n = 60 + (i as usize * 37) % 141;
        let sizes: Vec<usize> = (0..groups).map(|g| n / groups + usize::from(g < n % groups)).collect();
        let data = blobs(&mut rng, dim, &sizes, 8.0, 1.0);
        let cfg = SweepConfig { seed: i, ..SweepConfig::default() };
        let fit = fit_clusters(&data, &cfg).unwrap();
        let oracle = oracle_kmeans(&data, fit.k_swept, ORACLE_RESTARTS, 7000 + i);
        let r = fit.clustering.inertia / oracle - 1.0;
        worst = worst.max(r);
        if r > CLUSTER_REL_TOL {
            fails.push(format!("instance {i} (n={n}, k={}): inertia {:.3} vs oracle {oracle:.3}", fit.k_swept, fit.clustering.inertia));
        }
        if fit.retained != expected_retained(&fit.clustering.assignments, fit.k_swept, cfg.eps2) {
            fails.push(format!("instance {i}: pruning kept {:?}", fit.retained));
        }
    }
    // Constructed cases: four large groups plus far-off small ones, one of
    // them sitting exactly at the threshold (5 of 200 = 2.5%).
    let mut pruned_total = 0;
    for (case, small) in [vec![1usize, 1, 1, 1], vec![2, 3, 5], vec![4, 1, 5, 2]].iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(770 + case as u64);
        let big = (200 - small.iter().sum::<usize>()) / 4;
        let mut sizes = vec![big; 4];
        sizes[0] += 200 - small.iter().sum::<usize>() - 4 * big;
        let mut data = blobs(&mut rng, 3, &sizes, 10.0, 0.5);
        data.extend(blobs(&mut rng, 3, small, 60.0, 0.05).into_iter().map(|x| x.iter().map(|v| v + 100.0).collect()));
        let cfg = SweepConfig { seed: case as u64, ..SweepConfig::default() };
        let fit = fit_clusters(&data, &cfg).unwrap();
        let want = expected_retained(&fit.clustering.assignments, fit.k_swept, cfg.eps2);
        if fit.retained != want {
            fails.push(format!("case {case}: retained {:?}, expected {want:?}", fit.retained));
        }
        pruned_total += fit.k_swept - fit.retained.len();
    }
    if pruned_total == 0 {
        fails.push("constructed cases pruned nothing".into());
    }
    Outcome::new(fails, format!("worst inertia excess {:+.2}%, {pruned_total} clusters pruned in constructed cases", 100.0 * worst))
}

fn bank_users() -> &'static (Vec<BankUser>, f64) {
    static B: OnceLock<(Vec<BankUser>, f64)> = OnceLock::new();
    B.get_or_init(|| {
        let t = Instant::now();
        let users = prepare_bank(&default_bank(1), &BankConfig::default()).unwrap();
        (users, t.elapsed().as_secs_f64())
    })
}

fn c8_roc() -> Outcome {
    let t = Instant::now();
    let (users, prep) = bank_users();
    let reports = run_robustness_roc(users, &RocConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64() + prep;
    let mut fails = Vec::new();
    let aucs: Vec<f64> = reports.iter().map(|r| r.auc).collect();
    if !aucs.windows(2).all(|w| w[1] > w[0]) {
        fails.push("AUC not strictly increasing in n".into());
    }
    let r7 = reports.iter().find(|r| r.n == 7).unwrap();
    let tpr = r7.tpr_at(ROC_MAX_FPR);
    if tpr < ROC_MIN_TPR {
        fails.push(format!("n=7 TPR {tpr:.3} at FPR <= {ROC_MAX_FPR}"));
    }
    for r in &reports {
        if !r.curve.windows(2).all(|w| w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr) {
            fails.push(format!("n={} curve not monotone", r.n));
        }
        if !r.short_users.is_empty() {
            fails.push(format!("n={} users {:?} had too few positives", r.n, r.short_users));
        }
    }
    if secs > ROC_MAX_S {
        fails.push(format!("took {secs:.0} s"));
    }
    let a: Vec<String> = reports.iter().map(|r| format!("n={}: {:.4}", r.n, r.auc)).collect();
    Outcome::new(fails, format!("AUC {}; n=7 TPR {tpr:.3} at FPR <= {ROC_MAX_FPR}", a.join(", ")))
}

fn c9_separation() -> Outcome {
    let (users, _) = bank_users();
    let rows = run_separation(users).unwrap();
    let fails: Vec<String> = rows
        .iter()
        .filter(|r| r.gap() < SEPARATION_GAP)
        .map(|r| format!("{}: genuine {:.3} impostor {:.3}", r.user, r.genuine_median, r.impostor_median))
        .collect();
    let min = rows.iter().map(|r| r.gap()).fold(f64::INFINITY, f64::min);
    Outcome::new(fails, format!("{} users, smallest gap {min:.3}", rows.len()))
}

struct Session {
    statuses: Vec<Status>,
    enroll_body: String,
    scores: Vec<String>,
    model: Vec<u8>,
    stored: (String, String),
    records: Vec<ContextRecord>,
    log_unchanged_by_rejects: bool,
}

/// One fixed client session against a fresh server over TCP.
fn service_session() -> Session {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ServerConfig { data_dir: dir.path().to_path_buf(), skew_window_s: 0, seed: 10, ..ServerConfig::default() };
    let svc = Arc::new(Service::new(cfg, server_key(), Arc::new(|| 0)).unwrap());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let s = svc.clone();
    std::thread::spawn(move || serve(listener, s));

    let keys = ClientKeys::generate(&mut ChaCha20Rng::seed_from_u64(101), server_key().to_public_key());
    let prot = keys.protector().unwrap();
    let records = generate_trace(&default_profile(10, 4), 2, 600, 102).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(103);
    let mut seal = |r: &ContextRecord| seal_envelope(&prot.protect_record(r).unwrap(), &keys.server_pub, &mut rng).unwrap().to_bytes();
    let mut client = Client::connect(addr).unwrap();

    for r in &records[..1008] {
        let resp = client.ingest(&seal(r)).unwrap();
        assert_eq!(resp.status, Status::Ok, "{}", resp.body_text());
    }
    let log_path = dir.path().join("users").join(keys.user_id.to_hex()).join("samples.log");
    let before = std::fs::read(&log_path).unwrap();

    let fresh = seal(&records[1008]);
    let mut statuses = Vec::new();
    let replay = seal(&records[500]);
    statuses.push(client.ingest(&replay).unwrap().status);
    let mut ct = fresh.clone();
    let n = ct.len();
    ct[n - 20] ^= 0x04;
    statuses.push(client.ingest(&ct).unwrap().status);
    let mut wrapped = fresh.clone();
    wrapped[100] ^= 0x10;
    statuses.push(client.ingest(&wrapped).unwrap().status);
    // Cut inside the wrapped key, so the framing itself is broken.
    statuses.push(client.ingest(&fresh[..100]).unwrap().status);
    statuses.push(client.authenticate(&replay).unwrap().status);
    let log_unchanged_by_rejects = std::fs::read(&log_path).unwrap() == before;

    let enroll = client.enroll(&keys.user_id).unwrap();
    assert_eq!(enroll.status, Status::Ok, "{}", enroll.body_text());
    let mut scores = vec![client.authenticate(&fresh).unwrap().field("score").unwrap()];
    for r in records[1009..].iter().step_by(20) {
        let resp = client.authenticate(&seal(r)).unwrap();
        assert_eq!(resp.status, Status::Ok, "{}", resp.body_text());
        scores.push(resp.field("score").unwrap());
    }
    let udir = dir.path().join("users").join(keys.user_id.to_hex());
    let model = std::fs::read(udir.join("model.txt")).unwrap();
    let stored = (std::fs::read_to_string(&log_path).unwrap(), String::from_utf8(model.clone()).unwrap());
    Session { statuses, enroll_body: enroll.body_text(), scores, model, stored, records, log_unchanged_by_rejects }
}

fn raw_leaks(log: &str, model: &str, records: &[ContextRecord]) -> Vec<String> {
    let mut strings = BTreeSet::new();
    let mut coords = BTreeSet::new();
    for r in records {
        for f in CategoricalField::ALL {
            if f == CategoricalField::DayIndex {
                continue;
            }
            for v in r.categorical(f).unwrap_or_default() {
                if v.len() >= 6 {
                    strings.insert(v.to_string());
                }
            }
        }
        for x in [r.position.lat(), r.position.lon()] {
            coords.insert(format!("{x:.4}"));
        }
    }
    let mut hashed = String::new();
    for line in log.lines() {
        if ProtectedSample::from_text(line).is_err() {
            return vec![format!("stored line is not a protected sample: {:.60}", line)];
        }
        for part in line.split(';').filter(|p| !["wifi_rssi=", "network_rssi=", "time_of_day="].iter().any(|k| p.starts_with(k))) {
            hashed.push_str(part);
            hashed.push('\n');
        }
    }
    let mut leaks: Vec<String> = strings.iter().filter(|s| log.contains(s.as_str()) || model.contains(s.as_str())).cloned().collect();
    leaks.extend(coords.iter().filter(|c| hashed.contains(c.as_str())).cloned());
    leaks
}

fn c10_service() -> Outcome {
    let a = service_session();
    let b = service_session();
    let mut fails = Vec::new();
    let want = [Status::Replay, Status::Integrity, Status::Unwrap, Status::Malformed, Status::Replay];
    if a.statuses != want {
        fails.push(format!("rejections {:?}, expected {want:?}", a.statuses));
    }
    if !a.log_unchanged_by_rejects {
        fails.push("rejected messages changed the store".into());
    }
    let leaks = raw_leaks(&a.stored.0, &a.stored.1, &a.records);
    if !leaks.is_empty() {
        fails.push(format!("{} raw values in store, e.g. {:?}", leaks.len(), leaks[0]));
    }
    if a.model != b.model || a.enroll_body != b.enroll_body {
        fails.push("enrollment differs between identical runs".into());
    }
    if a.scores != b.scores {
        fails.push("scores differ between identical runs".into());
    }
    let parsed: Vec<f64> = a.scores.iter().map(|s| s.parse().unwrap()).collect();
    if !parsed.iter().all(|s| (0.0..=1.0).contains(s)) {
        fails.push("score outside [0, 1]".into());
    }
    Outcome::new(
        fails,
        format!(
            "codes replay/integrity/unwrap/malformed = {:#04x}/{:#04x}/{:#04x}/{:#04x}; {} scores reproduced; {}",
            Status::Replay as u8,
            Status::Integrity as u8,
            Status::Unwrap as u8,
            Status::Malformed as u8,
            a.scores.len(),
            a.enroll_body
        ),
    )
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "k-sweep", c1_k_sweep),
        (2, "distance-error", c2_distance_error),
        (3, "histogram-shape", c3_histogram_shape),
        (4, "estimator", c4_estimator),
        (5, "geodesy", c5_geodesy),
        (6, "crypto", c6_crypto),
        (7, "clustering-oracle", c7_clustering),
        (8, "robustness-roc", c8_roc),
        (9, "separation", c9_separation),
        (10, "service", c10_service),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut passed = 0;
    let mut run = 0;
    for (id, name, f) in criteria {
        if !filters.is_empty() && !filters.iter().any(|x| name.contains(x.as_str()) || x == &id.to_string()) {
            continue;
        }
        run += 1;
        let t = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome { pass: false, detail: format!("panicked: {msg}") }
        });
        passed += usize::from(outcome.pass);
        println!(
            "[{}] criterion {id:>2} {name} ({:.1} s): {}",
            if outcome.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {passed}/{run} criteria passed");
    if passed != run {
        std::process::exit(1);
    }
}
