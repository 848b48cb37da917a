use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use infocommit::audit::{lemma_suite, privacy_suite, soundness_suite, summary, to_csv};
use infocommit::config::{ConfigFile, Setup};
use infocommit::efficiency::{growth_ratios, measure_rounds};
use infocommit::exec::Exec;
use infocommit::persist::{PersistedState, ResponseFile};
use infocommit::protocol::{recover, OpCounter, ProtocolError, ProverState, Verdict, VerifierState};
use infocommit::rng::SeedTree;
use infocommit::session::{
    run_prover, run_verifier, ProverReport, RoundOutcome, SessionError, VerifierReport,
};
use infocommit::transport::{duplex, Recorder, TcpTransport, Transcript, Transport};

const EXIT_CONFIG: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;
const EXIT_PROTOCOL: u8 = 4;
const EXIT_REJECT: u8 = 5;
const EXIT_AUDIT_FAILED: u8 = 1;

/// A failure with the exit status it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }

    fn config(error: impl Into<anyhow::Error>) -> Self {
        Self::new(EXIT_CONFIG, error)
    }
}

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        Failure::new(e.exit_code(), e)
    }
}

type CliResult = Result<u8, Failure>;

#[derive(Parser)]
#[command(name = "infocommit", version, about = "Information-theoretic polynomial commitment toolkit")]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a validated JSON configuration.
    GenConfig(GenConfigArgs),
    /// Run the commitment phase in-process and persist both parties' state.
    Commit(CommitArgs),
    /// Answer one evaluation query from a persisted prover state.
    Eval(EvalArgs),
    /// Check a response against a persisted verifier state.
    Verify(VerifyArgs),
    /// Run both roles end to end and print the recovered values.
    RunDemo(DemoArgs),
    /// Run one role over TCP.
    RunRole(RoleArgs),
    /// Run an audit suite; CSV rows go to stdout, the summary to stderr.
    Audit(AuditArgs),
    /// Per-round operation counts and wall time against d.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenConfigArgs {
    #[arg(long)]
    q: u64,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value_t = 10)]
    r: usize,
    #[arg(long, default_value_t = 10)]
    c: usize,
    #[arg(long, default_value_t = 0)]
    xi: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CommitArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    prover_state: PathBuf,
    #[arg(long)]
    verifier_state: PathBuf,
    /// Write the framed transcript here, with an index at `<path>.idx`.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    x: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    response: PathBuf,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated query points.
    #[arg(long, value_delimiter = ',')]
    queries: Vec<u64>,
    /// Corrupt every response on the verifier side before checking.
    #[arg(long)]
    tamper: bool,
    /// Connect the roles over loopback TCP instead of an in-process channel.
    #[arg(long)]
    tcp: bool,
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Role {
    Prover,
    Verifier,
}

#[derive(Args)]
struct RoleArgs {
    #[arg(long, value_enum)]
    role: Role,
    #[arg(long)]
    config: PathBuf,
    /// Address to accept one connection on.
    #[arg(long, conflicts_with = "connect", required_unless_present = "connect")]
    listen: Option<String>,
    /// Address to connect to.
    #[arg(long)]
    connect: Option<String>,
    #[arg(long, value_delimiter = ',')]
    queries: Vec<u64>,
    #[arg(long)]
    tamper: bool,
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Soundness,
    Privacy,
    Lemmas,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(value_enum)]
    suite: Suite,
    /// Trials (soundness) or random instances (privacy, lemmas).
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10000,40000,160000")]
    d: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    c: usize,
    #[arg(long, default_value_t = 5)]
    rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::GenConfig(a) => gen_config(a),
        Command::Commit(a) => commit(a),
        Command::Eval(a) => eval(a),
        Command::Verify(a) => verify(a),
        Command::RunDemo(a) => run_demo(a),
        Command::RunRole(a) => run_role(a),
        Command::Audit(a) => audit(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> Result<ConfigFile, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::config)?;
    ConfigFile::from_json(&text)
        .with_context(|| format!("invalid config {}", path.display()))
        .map_err(Failure::config)
}

fn load_state(path: &Path) -> Result<PersistedState, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::config)?;
    PersistedState::from_bytes(&bytes)
        .with_context(|| format!("invalid state file {}", path.display()))
        .map_err(Failure::config)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::config)
}

fn index_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".idx");
    PathBuf::from(name)
}

fn save_transcript(path: Option<&Path>, transcript: &Transcript) -> Result<(), Failure> {
    if let Some(path) = path {
        transcript
            .write_files(path, &index_path(path))
            .with_context(|| format!("writing transcript {}", path.display()))
            .map_err(Failure::config)?;
        info!("transcript: {} frames, {} bytes", transcript.len(), transcript.bytes().len());
    }
    Ok(())
}

fn gen_config(a: GenConfigArgs) -> CliResult {
    let cfg = ConfigFile::generate(a.q, a.d, a.r, a.c, a.xi, a.seed).map_err(Failure::config)?;
    let set = cfg.protocol().map_err(Failure::config)?.prohibited().to_vec();
    let json = cfg.to_json();
    match &a.out {
        Some(path) => write_file(path, format!("{json}\n").as_bytes())?,
        None => println!("{json}"),
    }
    eprintln!("prohibited set S = {set:?}");
    Ok(0)
}

/// Runs both roles on threads over an in-process channel or loopback TCP.
fn run_pair(
    setup: &Setup,
    queries: Vec<u64>,
    tamper: bool,
    tcp: bool,
) -> Result<(ProverReport, VerifierReport, Transcript), Failure> {
    let prover = setup.prover_role();
    let verifier = setup.verifier_role(queries, tamper);
    let (p, v) = if tcp {
        let listener = TcpListener::bind("127.0.0.1:0").map_err(|e| Failure::new(EXIT_TRANSPORT, e))?;
        let addr = listener.local_addr().map_err(|e| Failure::new(EXIT_TRANSPORT, e))?;
        thread::scope(|scope| {
            let handle = scope.spawn(move || -> Result<ProverReport, Failure> {
                let mut t = TcpTransport::accept(&listener).map_err(|e| Failure::new(EXIT_TRANSPORT, e))?;
                Ok(run_prover(&prover, &mut t)?)
            });
            let v = TcpTransport::connect(addr)
                .map_err(|e| Failure::new(EXIT_TRANSPORT, e))
                .and_then(|t| record_verifier(&verifier, t));
            (join(handle), v)
        })
    } else {
        let (pt, vt) = duplex();
        thread::scope(|scope| {
            let handle = scope.spawn(move || -> Result<ProverReport, Failure> {
                let mut pt = pt;
                Ok(run_prover(&prover, &mut pt)?)
            });
            let v = record_verifier(&verifier, vt);
            (join(handle), v)
        })
    };
    let (report, transcript) = v?;
    Ok((p?, report, transcript))
}

fn join<T>(handle: thread::ScopedJoinHandle<'_, Result<T, Failure>>) -> Result<T, Failure> {
    handle
        .join()
        .unwrap_or_else(|_| Err(Failure::new(EXIT_PROTOCOL, anyhow!("prover thread panicked"))))
}

/// Runs the verifier, keeping the transcript even when the session fails;
/// the transport is dropped on return so a waiting peer sees the close.
fn record_verifier<T: Transport>(
    verifier: &infocommit::session::VerifierRole,
    t: T,
) -> Result<(VerifierReport, Transcript), Failure> {
    let mut rec = Recorder::new(t);
    let out = run_verifier(verifier, &mut rec);
    let transcript = rec.into_transcript();
    Ok((out?, transcript))
}

fn commit(a: CommitArgs) -> CliResult {
    let cfg = load_config(&a.config)?;
    let setup = cfg.setup().map_err(Failure::config)?;
    let (_, report, transcript) = run_pair(&setup, Vec::new(), false, false)?;
    save_transcript(a.transcript.as_deref(), &transcript)?;
    let config = setup.params.config.clone();
    let prover = PersistedState::Prover {
        config: config.clone(),
        key: setup.prover_key.clone(),
        poly: setup.poly.clone(),
        rounds: 0,
    };
    let verifier = PersistedState::Verifier {
        config,
        key: setup.verifier_key.clone(),
        vk: report.vk,
        rounds: 0,
    };
    write_file(&a.prover_state, &prover.to_bytes())?;
    write_file(&a.verifier_state, &verifier.to_bytes())?;
    println!(
        "committed: prover state {}, verifier state {}",
        a.prover_state.display(),
        a.verifier_state.display()
    );
    Ok(0)
}

fn eval(a: EvalArgs) -> CliResult {
    let mut state = load_state(&a.state)?;
    let PersistedState::Prover { config, key, poly, .. } = &state else {
        return Err(Failure::config(anyhow!("{} is not a prover state", a.state.display())));
    };
    let field = config.field().clone();
    if !field.contains(a.x) {
        return Err(Failure::config(anyhow!("x = {} is not a field element", a.x)));
    }
    let matrix = poly.to_matrix(config.s()).map_err(Failure::config)?;
    let prover = ProverState::new(config, &matrix, key).map_err(Failure::config)?;
    let response = match prover.respond(a.x, &mut OpCounter::default()) {
        Ok(r) => r,
        Err(e @ ProtocolError::Refused { .. }) => return Err(Failure::new(EXIT_PROTOCOL, e)),
        Err(e) => return Err(Failure::config(e)),
    };
    write_file(&a.out, &ResponseFile { x: a.x, response }.to_bytes(&field))?;
    state.bump_rounds();
    write_file(&a.state, &state.to_bytes())?;
    println!("response for x = {} written to {}", a.x, a.out.display());
    Ok(0)
}

fn verify(a: VerifyArgs) -> CliResult {
    let mut state = load_state(&a.state)?;
    let PersistedState::Verifier { config, key, vk, rounds } = &state else {
        return Err(Failure::config(anyhow!("{} is not a verifier state", a.state.display())));
    };
    if *rounds as usize >= config.query_soft_cap() {
        log::warn!(
            "query {} exceeds the soft cap of {}; the privacy floor d - (m + c)^2 is no longer positive",
            rounds + 1,
            config.query_soft_cap()
        );
    }
    let field = config.field().clone();
    let bytes = fs::read(&a.response)
        .with_context(|| format!("reading {}", a.response.display()))
        .map_err(Failure::config)?;
    let file = ResponseFile::from_bytes(&field, &bytes)
        .with_context(|| format!("invalid response file {}", a.response.display()))
        .map_err(|e| Failure::new(EXIT_PROTOCOL, e))?;
    let verifier = VerifierState::new(config, key, vk).map_err(Failure::config)?;
    let verdict = verifier.check(file.x, &file.response, &mut OpCounter::default());
    state.bump_rounds();
    write_file(&a.state, &state.to_bytes())?;
    match verdict {
        Verdict::Accept => {
            println!("accept x = {} f(x) = {}", file.x, recover(&field, file.x, &file.response));
            Ok(0)
        }
        Verdict::Reject(reason) => {
            println!("reject x = {} ({reason:?})", file.x);
            Ok(EXIT_REJECT)
        }
    }
}

fn print_rounds(report: &VerifierReport) -> u8 {
    for r in &report.rounds {
        match r {
            RoundOutcome::Accepted { x, value } => println!("x = {x}: accept f(x) = {value}"),
            RoundOutcome::Rejected { x, reason } => println!("x = {x}: reject ({reason:?})"),
            RoundOutcome::Refused { x } => println!("x = {x}: refused by prover"),
        }
    }
    if !report.duplicates.is_empty() {
        println!("repeated query points: {:?}", report.duplicates);
    }
    if report.any_rejected() {
        EXIT_REJECT
    } else {
        0
    }
}

fn run_demo(a: DemoArgs) -> CliResult {
    let cfg = load_config(&a.config)?;
    let setup = cfg.setup().map_err(Failure::config)?;
    let (prover, report, transcript) = run_pair(&setup, a.queries, a.tamper, a.tcp)?;
    save_transcript(a.transcript.as_deref(), &transcript)?;
    info!(
        "prover answered {} and refused {} queries; {} phase-one restarts",
        prover.answered, prover.refused, prover.restarts
    );
    Ok(print_rounds(&report))
}

fn run_role(a: RoleArgs) -> CliResult {
    let cfg = load_config(&a.config)?;
    let setup = cfg.setup().map_err(Failure::config)?;
    let transport = match (&a.listen, &a.connect) {
        (Some(addr), _) => TcpListener::bind(addr).and_then(|l| TcpTransport::accept(&l)),
        (None, Some(addr)) => connect_with_retry(addr),
        (None, None) => unreachable!("clap requires one of --listen, --connect"),
    }
    .map_err(|e| Failure::new(EXIT_TRANSPORT, e))?;
    let mut rec = Recorder::new(transport);
    let code = match a.role {
        Role::Prover => {
            let out = run_prover(&setup.prover_role(), &mut rec);
            save_transcript(a.transcript.as_deref(), rec.transcript())?;
            let r = out?;
            println!("answered {} queries, refused {}", r.answered, r.refused);
            0
        }
        Role::Verifier => {
            let out = run_verifier(&setup.verifier_role(a.queries, a.tamper), &mut rec);
            save_transcript(a.transcript.as_deref(), rec.transcript())?;
            print_rounds(&out?)
        }
    };
    Ok(code)
}

/// The listening side may still be starting; retry for about five seconds.
fn connect_with_retry(addr: &str) -> std::io::Result<TcpTransport> {
    let mut last = None;
    for _ in 0..50 {
        match TcpTransport::connect(addr) {
            Ok(t) => return Ok(t),
            Err(e) => last = Some(e),
        }
        thread::sleep(std::time::Duration::from_millis(100));
    }
    Err(last.expect("at least one attempt"))
}

fn audit(a: AuditArgs) -> CliResult {
    let seeds = SeedTree::new(a.seed);
    let exec = if a.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let rows = match a.suite {
        Suite::Soundness => soundness_suite(a.trials.unwrap_or(100_000), &seeds, exec),
        Suite::Privacy => privacy_suite(a.trials.unwrap_or(1000), &seeds, exec),
        Suite::Lemmas => lemma_suite(a.trials.unwrap_or(1000), &seeds, exec),
    }
    .map_err(Failure::config)?;
    let csv = to_csv(&rows);
    match &a.out {
        Some(path) => write_file(path, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    eprint!("{}", summary(&rows));
    Ok(if rows.iter().all(|r| r.pass) { 0 } else { EXIT_AUDIT_FAILED })
}

fn bench(a: BenchArgs) -> CliResult {
    if a.rounds == 0 {
        return Err(Failure::config(anyhow!("--rounds must be at least 1")));
    }
    for &d in &a.d {
        let s = d.isqrt();
        if s * s != d || s < 2 {
            return Err(Failure::config(anyhow!("d = {d} is not a square of at least 4")));
        }
        if a.c > s {
            return Err(Failure::config(anyhow!("c = {} exceeds s = {s} at d = {d}", a.c)));
        }
    }
    let costs: Vec<_> = a.d.iter().map(|&d| measure_rounds(d, a.c, a.rounds, a.seed)).collect();
    println!("d,s,prover_ops,verifier_ops,prover_us,verifier_us,accepted");
    for c in &costs {
        println!(
            "{},{},{},{},{:.1},{:.1},{}",
            c.d,
            c.s,
            c.prover_ops.total(),
            c.verifier_ops.total(),
            c.prover_time.as_secs_f64() * 1e6,
            c.verifier_time.as_secs_f64() * 1e6,
            c.all_accepted
        );
    }
    for (w, (v, p)) in a.d.windows(2).zip(growth_ratios(&costs)) {
        eprintln!("d {} -> {}: prover ratio {p:.3}, verifier ratio {v:.3}", w[0], w[1]);
    }
    Ok(0)
}
