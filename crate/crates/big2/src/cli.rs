//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 failed
//! `eval --ci` check.

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use crate::config::{Profile, RunConfig};
use crate::evaluation::{
    curve_vs_random, format_report, histogram_export, run_match, write_curve, MatchOptions, PolicySpec,
};
use crate::play::{self, PlayOptions, PlayOutcome};
use crate::server::{self, AppState, ServerOptions};
use crate::trainer::{latest_checkpoint, list_checkpoints, Trainer};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "big2", version, about = "Big 2 engine, self-play trainer, evaluator and game server")]
pub struct Cli {
    /// TOML run configuration; omitted keys take the profile defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Default settings to start from: `reference` (full schedule) or `desk`.
    #[arg(long, global = true, value_name = "NAME")]
    pub profile: Option<Profile>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for rollouts, gradients and evaluation.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train by self-play; writes metrics.csv, run_config.toml and checkpoints.
    Train(TrainArgs),
    /// Play policies against each other and report score statistics.
    Eval(EvalArgs),
    /// Play one game in the terminal against three AI seats.
    Play(PlayArgs),
    /// Serve the JSON game protocol over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Environment steps to train for (rounded down to whole updates).
    #[arg(long)]
    pub total_steps: Option<u64>,
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_every: Option<u64>,
    /// Continue from the newest checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Stop after this many updates in this invocation.
    #[arg(long)]
    pub max_updates: Option<u64>,
    /// Print a progress line every N updates (0 disables).
    #[arg(long, default_value_t = 10)]
    pub log_every: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Player 0: `random`, `greedy` or a checkpoint path.
    #[arg(long = "a", value_name = "POLICY", required_unless_present = "curve")]
    pub a: Option<PolicySpec>,
    /// Players 1-3.
    #[arg(long = "b", value_name = "POLICY", default_value = "random")]
    pub b: PolicySpec,
    #[arg(long)]
    pub games: Option<usize>,
    /// Network policies play their most likely move.
    #[arg(long)]
    pub deterministic: bool,
    /// Keep every player in the same seat for the whole match.
    #[arg(long)]
    pub fixed_seats: bool,
    /// Play every deal four times, rotating the players through all seats.
    /// Standard errors are computed over deals.
    #[arg(long, conflicts_with = "fixed_seats")]
    pub duplicate: bool,
    /// Exit with status 3 unless player 0's mean exceeds --min-mean by
    /// --sigmas standard errors.
    #[arg(long)]
    pub ci: bool,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub min_mean: f64,
    #[arg(long)]
    pub sigmas: Option<f64>,
    /// Write per-player score probabilities to this CSV.
    #[arg(long, value_name = "CSV")]
    pub histogram: Option<PathBuf>,
    /// Evaluate every checkpoint of this run directory against random
    /// players instead of running a single match.
    #[arg(long, value_name = "RUN_DIR", conflicts_with_all = ["a", "ci", "histogram"], requires = "out")]
    pub curve: Option<PathBuf>,
    /// Output CSV for --curve.
    #[arg(long, value_name = "CSV")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    /// Policy for the three AI seats: `random`, `greedy` or a checkpoint path.
    #[arg(long, value_name = "POLICY", default_value = "random")]
    pub opponent: PolicySpec,
    /// Your seat, 0-3. Seat 0 when omitted.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..4))]
    pub seat: Option<u8>,
    #[arg(long)]
    pub deterministic: bool,
    /// Save the game record here when the game ends.
    #[arg(long, value_name = "PATH")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    /// Default checkpoint for AI seats; random play when none is configured.
    #[arg(long, value_name = "PATH")]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "SECS")]
    pub idle_timeout: Option<u64>,
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
    Check(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Runtime(_) => EXIT_RUNTIME,
            Failure::Check(_) => EXIT_CHECK_FAILED,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli, input, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Runtime(m) | Failure::Check(m)) = &f;
            let _ = writeln!(err, "error: {m}");
            f.code()
        }
    }
}

/// Config file (or profile defaults) with the global flags applied.
fn base_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let profile = cli.profile.unwrap_or_default();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path, profile).map_err(|e| Failure::Usage(e.to_string()))?,
        None => RunConfig::for_profile(profile),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn validated(cfg: RunConfig) -> Result<RunConfig, Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn dispatch(cli: Cli, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = base_config(&cli)?;
    match cli.command {
        Command::Train(a) => cmd_train(cfg, a, out),
        Command::Eval(a) => cmd_eval(cfg, a, out),
        Command::Play(a) => cmd_play(cfg, a, input, out),
        Command::Serve(a) => cmd_serve(cfg, a, out),
    }
}

fn cmd_train(mut cfg: RunConfig, a: TrainArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if let Some(t) = a.total_steps {
        cfg.ppo.total_steps = t;
    }
    if let Some(d) = a.out_dir {
        cfg.train.out_dir = d;
    }
    if let Some(c) = a.checkpoint_every {
        cfg.train.checkpoint_every = c;
    }
    if a.max_updates == Some(0) {
        return Err(Failure::Usage("--max-updates must be at least 1".into()));
    }
    let cfg = validated(cfg)?;
    let dir = cfg.train.out_dir.clone();
    let has_checkpoint = latest_checkpoint(&dir).map_err(runtime)?.is_some();
    if a.resume && !has_checkpoint {
        return Err(Failure::Usage(format!("--resume: no checkpoint in {}", dir.display())));
    }
    if !a.resume && has_checkpoint {
        return Err(Failure::Usage(format!(
            "{} already holds checkpoints; pass --resume or choose another --out-dir",
            dir.display()
        )));
    }
    let mut trainer = if a.resume {
        Trainer::resume(cfg, &dir)
    } else {
        Trainer::new(cfg, &dir)
    }
    .map_err(runtime)?;
    let total = trainer.config().ppo.num_updates();
    let _ = writeln!(
        out,
        "training {} updates into {} (starting at update {})",
        total,
        dir.display(),
        trainer.updates()
    );
    let start = Instant::now();
    let log_every = a.log_every;
    let summary = trainer
        .run(a.max_updates, |row| {
            if log_every > 0 && (row.update % log_every == 0 || row.update == total) {
                let _ = writeln!(
                    out,
                    "update {:>7} steps {:>10} entropy {:.3} value_loss {:.3} kl {:.4} clip {:.3} lr {:.2e} [{:.0?}]",
                    row.update,
                    row.env_steps,
                    row.entropy,
                    row.value_loss,
                    row.approx_kl,
                    row.clip_fraction,
                    row.learning_rate,
                    Duration::from_secs(start.elapsed().as_secs()),
                );
            }
        })
        .map_err(runtime)?;
    if let Some(p) = &summary.checkpoint {
        let _ = writeln!(out, "{} updates, {} env steps; checkpoint {}", summary.updates, summary.env_steps, p.display());
    }
    Ok(())
}

fn cmd_eval(mut cfg: RunConfig, a: EvalArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if let Some(g) = a.games {
        cfg.eval.games = g;
    }
    if let Some(s) = a.sigmas {
        cfg.eval.sigmas = s;
    }
    cfg.eval.deterministic |= a.deterministic;
    cfg.eval.rotate_seats &= !a.fixed_seats;
    cfg.eval.duplicate |= a.duplicate;
    let cfg = validated(cfg)?;
    let opts = MatchOptions {
        games: cfg.eval.games,
        seed: cfg.seed,
        rotate_seats: cfg.eval.rotate_seats,
        duplicate: cfg.eval.duplicate,
        workers: cfg.workers,
    };

    if let Some(run_dir) = &a.curve {
        let out_path = a.out.as_deref().expect("clap requires --out with --curve");
        let checkpoints = list_checkpoints(run_dir).map_err(runtime)?;
        if checkpoints.is_empty() {
            return Err(Failure::Runtime(format!("no checkpoints under {}", run_dir.display())));
        }
        let points = curve_vs_random(&checkpoints, cfg.eval.deterministic, opts).map_err(runtime)?;
        for p in &points {
            let _ = writeln!(out, "update {:>7}  mean {:+.3} ± {:.3}", p.updates, p.mean_score, p.std_error);
        }
        write_curve(&points, out_path).map_err(runtime)?;
        return Ok(());
    }

    let subject = a.a.expect("clap requires --a without --curve").with_deterministic(cfg.eval.deterministic);
    let opponent = a.b.with_deterministic(cfg.eval.deterministic);
    let specs = [subject.clone(), opponent.clone(), opponent.clone(), opponent];
    let report = run_match(&specs, opts).map_err(runtime)?;
    let names = specs.each_ref().map(|s| s.to_string());
    let _ = write!(out, "{}", format_report(&report, &names));
    if let Some(path) = &a.histogram {
        histogram_export(&report, path).map_err(runtime)?;
    }
    if a.ci {
        let s = &report.players[0];
        let lower = s.mean - cfg.eval.sigmas * s.std_error;
        let verdict = format!(
            "player 0 mean {:+.3}, lower bound at {} sigma {:+.3}, threshold {:+.3}",
            s.mean, cfg.eval.sigmas, lower, a.min_mean
        );
        if !report.exceeds(0, a.min_mean, cfg.eval.sigmas) {
            return Err(Failure::Check(format!("check failed: {verdict}")));
        }
        let _ = writeln!(out, "check passed: {verdict}");
    }
    Ok(())
}

fn cmd_play(cfg: RunConfig, a: PlayArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = validated(cfg)?;
    if let Some(dir) = a.log.as_deref().and_then(Path::parent) {
        if !dir.as_os_str().is_empty() && !dir.is_dir() {
            return Err(Failure::Usage(format!("--log: directory {} does not exist", dir.display())));
        }
    }
    let opts = PlayOptions {
        seed: cfg.seed,
        human_seat: a.seat.unwrap_or(0),
        opponent: a.opponent.with_deterministic(a.deterministic),
    };
    let outcome = play::run(input, out, &opts).map_err(runtime)?;
    let log = match &outcome {
        PlayOutcome::Finished { log, .. } | PlayOutcome::Abandoned { log } => log,
    };
    if let Some(path) = &a.log {
        std::fs::write(path, log.to_text()).map_err(runtime)?;
    }
    Ok(())
}

fn cmd_serve(mut cfg: RunConfig, a: ServeArgs, out: &mut dyn Write) -> Result<(), Failure> {
    if let Some(h) = a.host {
        cfg.server.host = h;
    }
    if let Some(p) = a.port {
        cfg.server.port = p;
    }
    if let Some(c) = a.checkpoint {
        cfg.server.checkpoint = Some(c);
    }
    if let Some(t) = a.idle_timeout {
        cfg.server.idle_timeout_secs = t;
    }
    cfg.server.deterministic |= a.deterministic;
    let cfg = validated(cfg)?;
    let state = AppState::new(ServerOptions {
        default_checkpoint: cfg.server.checkpoint.clone(),
        deterministic: cfg.server.deterministic,
        idle_timeout: Duration::from_secs(cfg.server.idle_timeout_secs),
        seed: cfg.seed,
    })
    .map_err(runtime)?;
    let runtime_ = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(cfg.workers.max(1))
        .enable_all()
        .build()
        .map_err(runtime)?;
    let addr = format!("{}:{}", cfg.server.host, cfg.server.port);
    runtime_.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| Failure::Runtime(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(runtime)?;
        let _ = writeln!(out, "listening on http://{local}");
        let _ = out.flush();
        server::serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(runtime)
    })
}
