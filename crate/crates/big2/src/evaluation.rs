//! Matches between policies, learning curves and score distributions.

use std::collections::HashMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::thread;

use big2_core::eval::{duplicate_seeds, game_seeds, play_games, GameOutcome, MatchReport, MAX_SCORE};
use big2_core::game::SEATS;
use big2_core::net::{NetError, Network};
use big2_core::policy::{Greedy, NetworkPolicy, Policy, RandomUniform};
use serde::Serialize;
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot load {path}: {source}")]
    Checkpoint {
        path: PathBuf,
        source: CheckpointError,
    },
    #[error("network error: {0}")]
    Net(#[from] NetError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PolicyKind {
    RandomUniform,
    Scripted(String),
    Checkpoint(PathBuf),
}

/// What drives a seat. Text form: `random`, `greedy`, or a checkpoint
/// path (optionally written `ckpt:<path>`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// Network policies take the most likely move instead of sampling.
    pub deterministic: bool,
}

impl PolicySpec {
    pub fn random() -> PolicySpec {
        PolicySpec {
            kind: PolicyKind::RandomUniform,
            deterministic: false,
        }
    }

    pub fn checkpoint(path: impl Into<PathBuf>, deterministic: bool) -> PolicySpec {
        PolicySpec {
            kind: PolicyKind::Checkpoint(path.into()),
            deterministic,
        }
    }

    pub fn with_deterministic(mut self, deterministic: bool) -> PolicySpec {
        self.deterministic = deterministic;
        self
    }
}

impl FromStr for PolicySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let kind = match s {
            "" => return Err("empty policy".into()),
            "random" => PolicyKind::RandomUniform,
            "greedy" => PolicyKind::Scripted("greedy".into()),
            other => PolicyKind::Checkpoint(PathBuf::from(other.strip_prefix("ckpt:").unwrap_or(other))),
        };
        Ok(PolicySpec {
            kind,
            deterministic: false,
        })
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PolicyKind::RandomUniform => f.write_str("random"),
            PolicyKind::Scripted(name) => f.write_str(name),
            PolicyKind::Checkpoint(p) => write!(f, "{}", p.display()),
        }?;
        if self.deterministic && matches!(self.kind, PolicyKind::Checkpoint(_)) {
            f.write_str(" (argmax)")?;
        }
        Ok(())
    }
}

pub fn load_network(path: &Path) -> Result<Arc<Network<f32>>, EvalError> {
    Checkpoint::load(path)
        .map(|c| Arc::new(c.net))
        .map_err(|source| EvalError::Checkpoint {
            path: path.to_path_buf(),
            source,
        })
}

/// Instantiates each spec once; repeated specs share one policy.
pub fn build_policies(specs: &[PolicySpec; SEATS]) -> Result<[Arc<dyn Policy + Send>; SEATS], EvalError> {
    let mut built: HashMap<&PolicySpec, Arc<dyn Policy + Send>> = HashMap::new();
    let mut nets: HashMap<&Path, Arc<Network<f32>>> = HashMap::new();
    for spec in specs {
        if built.contains_key(spec) {
            continue;
        }
        let policy: Arc<dyn Policy + Send> = match &spec.kind {
            PolicyKind::RandomUniform => Arc::new(RandomUniform),
            PolicyKind::Scripted(name) if name == "greedy" => Arc::new(Greedy),
            PolicyKind::Scripted(name) => return Err(EvalError::Invalid(format!("unknown scripted policy {name:?}"))),
            PolicyKind::Checkpoint(path) => {
                let net = match nets.get(path.as_path()) {
                    Some(n) => n.clone(),
                    None => {
                        let n = load_network(path)?;
                        nets.insert(path.as_path(), n.clone());
                        n
                    }
                };
                Arc::new(NetworkPolicy::new(net, spec.deterministic))
            }
        };
        built.insert(spec, policy);
    }
    Ok(std::array::from_fn(|p| built[&specs[p]].clone()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    pub games: usize,
    pub seed: u64,
    pub rotate_seats: bool,
    /// Play each deal once per seat rotation (needs `rotate_seats` and a
    /// multiple of four games).
    pub duplicate: bool,
    pub workers: usize,
}

impl MatchOptions {
    pub fn new(games: usize, seed: u64) -> MatchOptions {
        MatchOptions {
            games,
            seed,
            rotate_seats: true,
            duplicate: false,
            workers: 1,
        }
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.games == 0 {
            return Err(EvalError::Invalid("at least one game is required".into()));
        }
        if self.duplicate && (!self.rotate_seats || self.games % SEATS != 0) {
            return Err(EvalError::Invalid(
                "duplicate deals need seat rotation and a multiple of four games".into(),
            ));
        }
        Ok(())
    }

    fn block(&self) -> usize {
        if self.duplicate {
            SEATS
        } else {
            1
        }
    }
}

/// Plays `opts.games` games split into contiguous blocks across workers.
/// Each game's randomness depends only on its seed and number, so the
/// outcome list does not depend on the worker count.
pub fn play_outcomes(players: [&dyn Policy; SEATS], opts: MatchOptions) -> Result<Vec<GameOutcome>, EvalError> {
    opts.validate()?;
    let seeds = if opts.duplicate {
        duplicate_seeds(opts.seed, opts.games)
    } else {
        game_seeds(opts.seed, opts.games)
    };
    let workers = opts.workers.max(1).min(seeds.len());
    if workers == 1 {
        return Ok(play_games(players, &seeds, 0, opts.rotate_seats)?);
    }
    let chunk = seeds.len().div_ceil(workers);
    let parts: Vec<Result<Vec<GameOutcome>, NetError>> = thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .enumerate()
            .map(|(i, block)| s.spawn(move || play_games(players, block, (i * chunk) as u64, opts.rotate_seats)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("match worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(seeds.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn run_match(specs: &[PolicySpec; SEATS], opts: MatchOptions) -> Result<MatchReport, EvalError> {
    let policies = build_policies(specs)?;
    let refs: [&dyn Policy; SEATS] = std::array::from_fn(|p| policies[p].as_ref() as &dyn Policy);
    Ok(MatchReport::from_blocks(&play_outcomes(refs, opts)?, opts.block()))
}

/// `subject` as player 0 against three copies of `opponent`.
pub fn one_vs_three(subject: &PolicySpec, opponent: &PolicySpec, opts: MatchOptions) -> Result<MatchReport, EvalError> {
    let specs = [subject.clone(), opponent.clone(), opponent.clone(), opponent.clone()];
    run_match(&specs, opts)
}

pub fn final_vs_earlier(
    final_ckpt: &Path,
    earlier: &Path,
    deterministic: bool,
    opts: MatchOptions,
) -> Result<MatchReport, EvalError> {
    one_vs_three(
        &PolicySpec::checkpoint(final_ckpt, deterministic),
        &PolicySpec::checkpoint(earlier, deterministic),
        opts,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub updates: u64,
    pub mean_score: f64,
    pub std_error: f64,
    pub win_rate: f64,
}

/// Each checkpoint as player 0 against three random players.
pub fn curve_vs_random(
    checkpoints: &[(u64, PathBuf)],
    deterministic: bool,
    opts: MatchOptions,
) -> Result<Vec<CurvePoint>, EvalError> {
    if checkpoints.is_empty() {
        return Err(EvalError::Invalid("no checkpoints given".into()));
    }
    checkpoints
        .iter()
        .map(|(updates, path)| {
            let report = one_vs_three(&PolicySpec::checkpoint(path, deterministic), &PolicySpec::random(), opts)?;
            let p = &report.players[0];
            Ok(CurvePoint {
                updates: *updates,
                mean_score: p.mean,
                std_error: p.std_error,
                win_rate: p.win_rate,
            })
        })
        .collect()
}

pub fn write_curve(points: &[CurvePoint], path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

/// `player,score,probability` for every score in `[-39, 39]`.
pub fn histogram_export(report: &MatchReport, path: &Path) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["player", "score", "probability"])?;
    for (p, stats) in report.players.iter().enumerate() {
        for score in -MAX_SCORE..=MAX_SCORE {
            w.write_record([p.to_string(), score.to_string(), format!("{}", stats.probability(score))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table.
pub fn format_report(report: &MatchReport, names: &[String; SEATS]) -> String {
    let mut out = format!("games: {}\n", report.games);
    out.push_str("player  mean      std_err   win_rate  policy\n");
    for (p, s) in report.players.iter().enumerate() {
        out.push_str(&format!(
            "{p:<7} {:<+9.3} {:<9.4} {:<9.4} {}\n",
            s.mean, s.std_error, s.win_rate, names[p]
        ));
    }
    out.push_str(&format!(
        "mean by seat: {}\n",
        report
            .seat_means
            .iter()
            .map(|m| format!("{m:+.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    ));
    out
}
