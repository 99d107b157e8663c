//! Run configuration: TOML file, named profiles and flag overrides.
//!
//! Every key is optional; missing keys take the profile's value. Example:
//!
//! ```toml
//! seed = 7
//! workers = 2
//!
//! [ppo]
//! parallel_games = 48
//! steps_per_segment = 20
//! gamma = 0.995
//! lambda = 0.95
//! minibatch_size = 240
//! epochs = 4
//! value_coef = 0.5
//! entropy_coef = 0.02
//! learning_rate = 0.00025
//! clip_range = 0.2
//! total_steps = 150000000
//! normalize_advantages = true
//! # max_grad_norm = 0.5
//!
//! [train]
//! out_dir = "runs/default"
//! checkpoint_every = 1000
//!
//! [eval]
//! games = 10000
//! deterministic = false
//! rotate_seats = true
//! duplicate = false
//! sigmas = 3.0
//!
//! [server]
//! host = "127.0.0.1"
//! port = 8080
//! idle_timeout_secs = 3600
//! deterministic = false
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use big2_core::Hyperparameters;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid hyperparameters: {0}")]
    Hyperparameters(#[from] big2_core::ppo::HyperparameterError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// Full-length reference schedule.
    #[default]
    Reference,
    /// 2,000 updates of 960 steps on the full-length annealing schedule,
    /// checkpoints every 100 updates.
    Desk,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" => Ok(Profile::Reference),
            "desk" => Ok(Profile::Desk),
            other => Err(format!("unknown profile {other:?} (expected reference or desk)")),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Reference => "reference",
            Profile::Desk => "desk",
        })
    }
}

pub const DESK_UPDATES: u64 = 2_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub out_dir: PathBuf,
    /// Write a checkpoint every this many updates (the last update is
    /// always saved).
    pub checkpoint_every: u64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            out_dir: PathBuf::from("runs/default"),
            checkpoint_every: 1_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub games: usize,
    /// Network policies take the most likely move instead of sampling.
    pub deterministic: bool,
    /// Cycle the players through the seats from game to game.
    pub rotate_seats: bool,
    /// Replay each deal four times so every player holds every hand.
    pub duplicate: bool,
    /// Width of the confidence band used by CI checks.
    pub sigmas: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            games: 10_000,
            deterministic: false,
            rotate_seats: true,
            duplicate: false,
            sigmas: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSettings {
    pub host: String,
    pub port: u16,
    /// Checkpoint driving the AI seats; random play when absent.
    pub checkpoint: Option<PathBuf>,
    pub idle_timeout_secs: u64,
    pub deterministic: bool,
}

impl Default for ServerSettings {
    fn default() -> Self {
        ServerSettings {
            host: "127.0.0.1".to_string(),
            port: 8080,
            checkpoint: None,
            idle_timeout_secs: 3_600,
            deterministic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub ppo: Hyperparameters,
    pub train: TrainSettings,
    pub eval: EvalSettings,
    pub server: ServerSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            workers: 1,
            ppo: Hyperparameters::default(),
            train: TrainSettings::default(),
            eval: EvalSettings::default(),
            server: ServerSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> RunConfig {
        let mut cfg = RunConfig::default();
        if profile == Profile::Desk {
            cfg.ppo.total_steps = DESK_UPDATES * cfg.ppo.batch_size() as u64;
            // Follow the opening stretch of the full-length schedule rather
            // than compressing the whole decay into the short run.
            cfg.ppo.anneal_steps = Some(Hyperparameters::default().total_steps);
            cfg.train.checkpoint_every = 100;
            cfg.train.out_dir = PathBuf::from("runs/desk");
        }
        cfg
    }

    /// Profile defaults overlaid with the keys present in `text`.
    pub fn from_toml(text: &str, profile: Profile, path: &Path) -> Result<RunConfig, ConfigError> {
        let base = toml::Value::try_from(RunConfig::for_profile(profile)).expect("config serialises");
        let overlay: toml::Value = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        merge(base, overlay).try_into().map_err(|e: toml::de::Error| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path, profile: Profile) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::from_toml(&text, profile, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.ppo.validate()?;
        if self.workers == 0 {
            return Err(ConfigError::Invalid("workers must be at least 1".into()));
        }
        if self.train.checkpoint_every == 0 {
            return Err(ConfigError::Invalid("train.checkpoint_every must be at least 1".into()));
        }
        if self.eval.games == 0 {
            return Err(ConfigError::Invalid("eval.games must be at least 1".into()));
        }
        if self.eval.duplicate && (!self.eval.rotate_seats || self.eval.games % 4 != 0) {
            return Err(ConfigError::Invalid(
                "eval.duplicate needs rotate_seats and a multiple of four games".into(),
            ));
        }
        if !(self.eval.sigmas > 0.0) {
            return Err(ConfigError::Invalid("eval.sigmas must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }
}

fn merge(base: toml::Value, overlay: toml::Value) -> toml::Value {
    match (base, overlay) {
        (toml::Value::Table(mut b), toml::Value::Table(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(existing) => merge(existing, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            toml::Value::Table(b)
        }
        (_, o) => o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        let reference = RunConfig::for_profile(Profile::Reference);
        assert_eq!(reference.ppo.num_updates(), 156_250);
        let desk = RunConfig::for_profile(Profile::Desk);
        assert_eq!(desk.ppo.num_updates(), 2_000);
        assert_eq!(desk.train.checkpoint_every, 100);
        desk.validate().unwrap();
    }

    #[test]
    fn file_overrides_profile() {
        let cfg = RunConfig::from_toml(
            "seed = 3\n[ppo]\nepochs = 2\nmax_grad_norm = 0.5\n",
            Profile::Desk,
            Path::new("x.toml"),
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.ppo.epochs, 2);
        assert_eq!(cfg.ppo.max_grad_norm, Some(0.5));
        assert_eq!(cfg.ppo.num_updates(), 2_000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml("[ppo]\nepoch = 2\n", Profile::Reference, Path::new("x.toml"));
        assert!(matches!(err, Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::for_profile(Profile::Desk);
        let back = RunConfig::from_toml(&cfg.to_toml(), Profile::Reference, Path::new("x.toml")).unwrap();
        assert_eq!(back, cfg);
    }
}
