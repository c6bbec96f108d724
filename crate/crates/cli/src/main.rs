//! `ctxauth`: key generation, simulation, protection, the server, and the
//! experiments, each as a thin layer over the library crates.

mod error;
mod eval;

use std::io::Write;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use clap::{Args, Parser, Subcommand};
use ctxauth_core::protect::{seal_envelope, ClientKeys, ContextRecord};
use ctxauth_core::simgen::{default_bank, generate_trace, ProfileBank, SAMPLE_INTERVAL_S};
use ctxauth_server::{Client, ClientError, Response, ServerConfig, Service, Status};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rsa::pkcs8::{DecodePublicKey, EncodePrivateKey, EncodePublicKey, LineEnding};
use rsa::{RsaPrivateKey, RsaPublicKey};

use error::{read_text, write_text, CliError, Kind, Result};

#[derive(Parser)]
#[command(name = "ctxauth", version, about = "Privacy-preserving context authentication toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a server key pair or a client key file.
    #[command(subcommand)]
    Keygen(Keygen),
    /// Simulate raw context traces for every profile in a bank.
    Simulate(SimulateArgs),
    /// Protect and seal raw records into envelopes (one base64 line each).
    Protect(ProtectArgs),
    /// Run the authentication server.
    Serve(ServeArgs),
    /// Upload envelopes to a server, then enroll the user.
    Enroll(EnrollArgs),
    /// Authenticate envelopes against a server and print one score per line.
    Score(ScoreArgs),
    /// Ask the server to run the weekly refresh for a user.
    Refresh(UserArgs),
    /// Show what the server holds for a user.
    Status(UserArgs),
    /// Reproduce the experiments and write their CSV files.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
}

#[derive(Subcommand)]
enum Keygen {
    /// RSA-2048 server key pair: server_key.pem (PKCS#8) and server_pub.pem.
    Server {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Client secrets (user id, HMAC key, salt, location hash parameters).
    Client {
        #[arg(long)]
        seed: u64,
        /// Server public key PEM.
        #[arg(long)]
        server_pub: PathBuf,
        #[arg(long, default_value = "keys.toml")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// Profile bank (TOML). Without it the built-in bank is used.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Seed of the built-in bank.
    #[arg(long, default_value_t = 1)]
    bank_seed: u64,
    #[arg(long, default_value_t = 1)]
    weeks: u32,
    #[arg(long)]
    seed: u64,
    /// Receives user_<i>.ndjson, one JSON record per line.
    #[arg(long, default_value = "traces")]
    out_dir: PathBuf,
    /// Also write the bank that was simulated.
    #[arg(long)]
    emit_bank: Option<PathBuf>,
}

#[derive(Args)]
struct ProtectArgs {
    #[arg(long)]
    keys: PathBuf,
    /// Records as written by `simulate`.
    #[arg(long)]
    records: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Seeds the envelope keys and nonces.
    #[arg(long)]
    seed: u64,
    /// Also write the protected samples in their text form.
    #[arg(long)]
    samples_out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    /// Server config (TOML). CTXAUTH_* variables override it, flags override both.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    host: Option<String>,
    /// 0 picks a free port.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    private_key: Option<PathBuf>,
    /// Seconds; 0 disables the check (needed for simulated traces).
    #[arg(long)]
    skew_window_s: Option<u64>,
    #[arg(long)]
    enrollment_floor: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EnrollArgs {
    #[arg(long, default_value = "127.0.0.1:7430")]
    addr: String,
    #[arg(long)]
    keys: PathBuf,
    /// Envelope file from `protect`. Without it only enrollment is requested.
    #[arg(long)]
    envelopes: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long, default_value = "127.0.0.1:7430")]
    addr: String,
    #[arg(long)]
    envelopes: PathBuf,
}

#[derive(Args)]
struct UserArgs {
    #[arg(long, default_value = "127.0.0.1:7430")]
    addr: String,
    #[arg(long)]
    keys: PathBuf,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            let _ = e.print();
            return;
        }
        Err(e) => {
            let _ = e.print();
            let err = CliError::new(Kind::Usage, e.kind().to_string());
            eprintln!("{}", err.line());
            std::process::exit(err.kind.exit_code());
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = run(cli.cmd) {
        eprintln!("{}", e.line());
        std::process::exit(e.kind.exit_code());
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Keygen(k) => keygen(k),
        Command::Simulate(a) => simulate(a),
        Command::Protect(a) => protect(a),
        Command::Serve(a) => serve(a),
        Command::Enroll(a) => enroll(a),
        Command::Score(a) => score(a),
        Command::Refresh(a) => user_request(a, |c, u| c.refresh(u)),
        Command::Status(a) => user_request(a, |c, u| c.status(u)),
        Command::Eval(e) => eval::run(e),
    }
}

fn keygen(k: Keygen) -> Result<()> {
    match k {
        Keygen::Server { seed, out_dir } => {
            let key = RsaPrivateKey::new(&mut ChaCha20Rng::seed_from_u64(seed), 2048).map_err(CliError::internal)?;
            let sk = key.to_pkcs8_pem(LineEnding::LF).map_err(CliError::internal)?;
            let pk = key.to_public_key().to_public_key_pem(LineEnding::LF).map_err(CliError::internal)?;
            write_text(&out_dir.join("server_key.pem"), &sk)?;
            write_text(&out_dir.join("server_pub.pem"), &pk)?;
            println!("wrote {}", out_dir.join("server_key.pem").display());
            println!("wrote {}", out_dir.join("server_pub.pem").display());
        }
        Keygen::Client { seed, server_pub, out } => {
            let pem = read_text(&server_pub)?;
            let pk = RsaPublicKey::from_public_key_pem(&pem)
                .map_err(|e| CliError::input(format!("{}: {e}", server_pub.display())))?;
            let keys = ClientKeys::generate(&mut ChaCha20Rng::seed_from_u64(seed), pk);
            write_text(&out, &keys.to_toml().map_err(CliError::internal)?)?;
            println!("user_id={}", keys.user_id);
        }
    }
    Ok(())
}

fn load_bank(profile: Option<&Path>, bank_seed: u64) -> Result<ProfileBank> {
    match profile {
        Some(p) => ProfileBank::from_toml(&read_text(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => Ok(default_bank(bank_seed)),
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let bank = load_bank(a.profile.as_deref(), a.bank_seed)?;
    if let Some(p) = &a.emit_bank {
        write_text(p, &bank.to_toml().map_err(CliError::internal)?)?;
    }
    for (i, profile) in bank.users.iter().enumerate() {
        let seed = a.seed.wrapping_add(i as u64);
        let records = generate_trace(profile, a.weeks, SAMPLE_INTERVAL_S, seed).map_err(CliError::input)?;
        let mut text = String::new();
        for r in &records {
            text.push_str(&serde_json::to_string(r).map_err(CliError::internal)?);
            text.push('\n');
        }
        let path = a.out_dir.join(format!("user_{i:02}.ndjson"));
        write_text(&path, &text)?;
        println!("{}\t{}\t{} records", path.display(), profile.name, records.len());
    }
    Ok(())
}

fn read_records(path: &Path) -> Result<Vec<ContextRecord>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::input(format!("{} line {}: {e}", path.display(), i + 1))))
        .collect()
}

fn read_keys(path: &Path) -> Result<ClientKeys> {
    ClientKeys::from_toml(&read_text(path)?).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn protect(a: ProtectArgs) -> Result<()> {
    let keys = read_keys(&a.keys)?;
    let records = read_records(&a.records)?;
    let p = keys.protector().map_err(CliError::input)?;
    let mut rng = ChaCha20Rng::seed_from_u64(a.seed);
    let mut envs = String::new();
    let mut samples = String::new();
    for r in &records {
        let s = p.protect_record(r).map_err(CliError::input)?;
        let env = seal_envelope(&s, &keys.server_pub, &mut rng).map_err(CliError::internal)?;
        envs.push_str(&B64.encode(env.to_bytes()));
        envs.push('\n');
        if a.samples_out.is_some() {
            samples.push_str(&s.to_text());
            samples.push('\n');
        }
    }
    write_text(&a.out, &envs)?;
    if let Some(path) = &a.samples_out {
        write_text(path, &samples)?;
    }
    println!("sealed {} records into {}", records.len(), a.out.display());
    Ok(())
}

fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ServerConfig::from_toml(&read_text(p)?).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?,
        None => ServerConfig::default(),
    };
    cfg.apply_env(std::env::vars()).map_err(CliError::input)?;
    if let Some(v) = a.data_dir {
        cfg.data_dir = v;
    }
    if let Some(v) = a.host {
        cfg.host = v;
    }
    if let Some(v) = a.port {
        cfg.port = v;
    }
    if let Some(v) = a.private_key {
        cfg.private_key = v;
    }
    if let Some(v) = a.skew_window_s {
        cfg.skew_window_s = v;
    }
    if let Some(v) = a.enrollment_floor {
        cfg.enrollment_floor = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let key_pem = read_text(&cfg.private_key)?;
    let key = <RsaPrivateKey as rsa::pkcs8::DecodePrivateKey>::from_pkcs8_pem(&key_pem)
        .map_err(|e| CliError::input(format!("{}: {e}", cfg.private_key.display())))?;
    let listener = TcpListener::bind(cfg.addr()).map_err(|e| CliError::internal(format!("bind {}: {e}", cfg.addr())))?;
    let svc = Service::new(cfg, key, ctxauth_server::system_clock()).map_err(CliError::internal)?;
    println!("listening on {}", listener.local_addr().map_err(CliError::internal)?);
    let _ = std::io::stdout().flush();
    ctxauth_server::serve(listener, Arc::new(svc)).map_err(CliError::internal)
}

fn connect(addr: &str) -> Result<Client> {
    Client::connect(addr).map_err(|e| CliError::new(Kind::Unreachable, format!("{addr}: {e}")))
}

fn net(e: ClientError) -> CliError {
    CliError::new(Kind::Unreachable, e.to_string())
}

fn read_envelopes(path: &Path) -> Result<Vec<Vec<u8>>> {
    read_text(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| B64.decode(l.trim()).map_err(|e| CliError::input(format!("{} line {}: {e}", path.display(), i + 1))))
        .collect()
}

fn rejected(resp: &Response) -> CliError {
    CliError::new(Kind::Rejected, format!("{}: {}", resp.status.name(), resp.body_text()))
}

fn enroll(a: EnrollArgs) -> Result<()> {
    let keys = read_keys(&a.keys)?;
    let mut client = connect(&a.addr)?;
    if let Some(path) = &a.envelopes {
        let (mut ok, mut refused) = (0usize, 0usize);
        for env in read_envelopes(path)? {
            let resp = client.ingest(&env).map_err(net)?;
            if resp.status == Status::Ok {
                ok += 1;
            } else {
                refused += 1;
                eprintln!("ingest {}: {}", resp.status.name(), resp.body_text());
            }
        }
        println!("ingested={ok} rejected={refused}");
    }
    let resp = client.enroll(&keys.user_id).map_err(net)?;
    if resp.status != Status::Ok {
        return Err(rejected(&resp));
    }
    println!("{}", resp.body_text());
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    let envs = read_envelopes(&a.envelopes)?;
    let mut client = connect(&a.addr)?;
    let mut refused = 0;
    for (i, env) in envs.iter().enumerate() {
        let resp = client.authenticate(env).map_err(net)?;
        match resp.status {
            Status::Ok => println!("{i}\t{}", resp.field("score").unwrap_or_default()),
            s => {
                refused += 1;
                println!("{i}\t{}\t{}", s.name(), resp.body_text());
            }
        }
    }
    if refused > 0 {
        return Err(CliError::new(Kind::Rejected, format!("{refused} of {} envelopes were not scored", envs.len())));
    }
    Ok(())
}

fn user_request(a: UserArgs, f: impl FnOnce(&mut Client, &ctxauth_core::protect::UserId) -> std::result::Result<Response, ClientError>) -> Result<()> {
    let keys = read_keys(&a.keys)?;
    let mut client = connect(&a.addr)?;
    let resp = f(&mut client, &keys.user_id).map_err(net)?;
    if resp.status != Status::Ok {
        return Err(rejected(&resp));
    }
    println!("{}", resp.body_text());
    Ok(())
}
