//! Self-play training loop: collect, estimate advantages, update, log.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::thread;

use big2_core::adam::{Adam, AdamConfig};
use big2_core::net::{NetError, Network, NetworkShape};
use big2_core::ppo::{
    minibatch_gradient, ppo_update, GradientEngine, LossCoefficients, LossStats, MinibatchRef, PpoError,
    SequentialGradients, TrainingBatch,
};
use big2_core::rollout::{run_steps, SelfPlayCollector};
use big2_core::{ENCODING_LEN, NUM_ACTIONS};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checkpoint::{Checkpoint, CheckpointError, CheckpointMeta};
use crate::config::RunConfig;

pub const METRICS_FILE: &str = "metrics.csv";
pub const RUN_CONFIG_FILE: &str = "run_config.toml";
pub const CHECKPOINT_DIR: &str = "checkpoints";

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("metrics log: {0}")]
    Metrics(#[from] csv::Error),
    #[error("network error: {0}")]
    Net(#[from] NetError),
    #[error("no checkpoint to resume from in {0}")]
    NothingToResume(PathBuf),
    #[error("checkpoint network shape differs from the configured one")]
    ShapeMismatch,
}

/// One row of the metrics log. Column order is part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub update: u64,
    pub env_steps: u64,
    pub games_finished: usize,
    pub mean_reward_seat0: Option<f64>,
    pub mean_reward_seat1: Option<f64>,
    pub mean_reward_seat2: Option<f64>,
    pub mean_reward_seat3: Option<f64>,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub loss: f64,
    pub learning_rate: f64,
    pub clip_range: f64,
    /// 1 when the update was rejected for a non-finite loss.
    pub skipped: u8,
}

pub const METRICS_COLUMNS: [&str; 16] = [
    "update",
    "env_steps",
    "games_finished",
    "mean_reward_seat0",
    "mean_reward_seat1",
    "mean_reward_seat2",
    "mean_reward_seat3",
    "surrogate",
    "value_loss",
    "entropy",
    "approx_kl",
    "clip_fraction",
    "loss",
    "learning_rate",
    "clip_range",
    "skipped",
];

/// Splits each minibatch across scoped threads and sums the pieces.
#[derive(Debug, Clone, Copy)]
pub struct ParallelGradients {
    pub workers: usize,
}

impl GradientEngine<f32> for ParallelGradients {
    fn gradient(
        &mut self,
        net: &Network<f32>,
        mb: MinibatchRef<'_, f32>,
        coeffs: LossCoefficients,
        grads: &mut Network<f32>,
    ) -> Result<LossStats, NetError> {
        let n = mb.len();
        if self.workers <= 1 || n < 2 {
            return SequentialGradients.gradient(net, mb, coeffs, grads);
        }
        let scale = 1.0 / n as f32;
        let chunk = n.div_ceil(self.workers);
        let parts: Vec<Result<(LossStats, Network<f32>), NetError>> = thread::scope(|s| {
            let handles: Vec<_> = (0..n)
                .step_by(chunk)
                .map(|start| {
                    let end = (start + chunk).min(n);
                    let part = MinibatchRef {
                        inputs: &mb.inputs[start * ENCODING_LEN..end * ENCODING_LEN],
                        masks: &mb.masks[start * NUM_ACTIONS..end * NUM_ACTIONS],
                        actions: &mb.actions[start..end],
                        old_log_probs: &mb.old_log_probs[start..end],
                        advantages: &mb.advantages[start..end],
                        returns: &mb.returns[start..end],
                    };
                    s.spawn(move || {
                        let mut g = Network::zeros(net.shape);
                        minibatch_gradient(net, part, coeffs, scale, &mut g).map(|st| (st, g))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
        });
        let mut total = LossStats::default();
        for part in parts {
            let (stats, g) = part?;
            total.merge(&stats);
            grads.add_scaled(&g, 1.0);
        }
        Ok(total)
    }
}

pub struct Trainer {
    cfg: RunConfig,
    dir: PathBuf,
    net: Network<f32>,
    adam: Adam<f32>,
    updates: u64,
    env_steps: u64,
    collector: SelfPlayCollector,
}

fn collector_for(cfg: &RunConfig, updates: u64) -> SelfPlayCollector {
    let seed = cfg.seed ^ updates.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    SelfPlayCollector::new(cfg.ppo.parallel_games, cfg.ppo.steps_per_segment, seed)
}

impl Trainer {
    /// Fresh network; nothing is written until the first update.
    pub fn new(cfg: RunConfig, dir: &Path) -> Result<Trainer, TrainError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net = Network::init(NetworkShape::STANDARD, &mut rng);
        Ok(Trainer {
            collector: collector_for(&cfg, 0),
            adam: Adam::new(net.shape, AdamConfig::default()),
            net,
            cfg,
            dir: dir.to_path_buf(),
            updates: 0,
            env_steps: 0,
        })
    }

    /// Continues from the newest checkpoint in `dir`.
    pub fn resume(cfg: RunConfig, dir: &Path) -> Result<Trainer, TrainError> {
        cfg.validate()?;
        let path = latest_checkpoint(dir)?.ok_or_else(|| TrainError::NothingToResume(dir.to_path_buf()))?;
        let ckpt = Checkpoint::load(&path)?;
        if ckpt.net.shape != NetworkShape::STANDARD {
            return Err(TrainError::ShapeMismatch);
        }
        let adam = ckpt
            .optimizer
            .unwrap_or_else(|| Adam::new(ckpt.net.shape, AdamConfig::default()));
        let updates = ckpt.meta.updates;
        Ok(Trainer {
            collector: collector_for(&cfg, updates),
            net: ckpt.net,
            adam,
            updates,
            env_steps: ckpt.meta.env_steps,
            cfg,
            dir: dir.to_path_buf(),
        })
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn network(&self) -> &Network<f32> {
        &self.net
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn is_finished(&self) -> bool {
        self.updates >= self.cfg.ppo.num_updates()
    }

    /// Collects one batch and runs one PPO update.
    pub fn step(&mut self) -> Result<MetricsRow, TrainError> {
        let hyper = self.cfg.ppo.clone();
        let workers = self.cfg.workers;

        let steps = self.collector.steps_needed();
        let slots = self.collector.slots_mut();
        if workers <= 1 {
            run_steps(slots, &self.net, steps)?;
        } else {
            let chunk = slots.len().div_ceil(workers);
            let net = &self.net;
            thread::scope(|s| {
                let handles: Vec<_> = slots
                    .chunks_mut(chunk)
                    .map(|part| s.spawn(move || run_steps(part, net, steps)))
                    .collect();
                handles
                    .into_iter()
                    .try_for_each(|h| h.join().expect("rollout worker panicked"))
            })?;
        }
        let segment = self.collector.finish(hyper.gamma, hyper.lambda);
        let batch = TrainingBatch::from_samples(&segment.samples, hyper.normalize_advantages);

        let progress = hyper.progress(self.updates);
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ 0x5eed_0f_5a3c);
        rng.set_stream(self.updates);
        let mut engine = ParallelGradients { workers };
        let outcome = ppo_update(&self.net, &self.adam, &batch, &hyper, progress, &mut rng, &mut engine);

        self.updates += 1;
        self.env_steps += segment.samples.len() as u64;
        let means = segment.mean_reward_by_seat();
        let (lr, clip) = hyper.annealed(progress);
        let mut row = MetricsRow {
            update: self.updates,
            env_steps: self.env_steps,
            games_finished: segment.finished_games.len(),
            mean_reward_seat0: means.map(|m| m[0]),
            mean_reward_seat1: means.map(|m| m[1]),
            mean_reward_seat2: means.map(|m| m[2]),
            mean_reward_seat3: means.map(|m| m[3]),
            surrogate: f64::NAN,
            value_loss: f64::NAN,
            entropy: f64::NAN,
            approx_kl: f64::NAN,
            clip_fraction: f64::NAN,
            loss: f64::NAN,
            learning_rate: lr,
            clip_range: clip,
            skipped: 0,
        };
        match outcome {
            Ok((net, adam, stats)) => {
                self.net = net;
                self.adam = adam;
                let l = stats.loss;
                row.surrogate = l.surrogate;
                row.value_loss = l.value_loss;
                row.entropy = l.entropy;
                row.approx_kl = l.approx_kl;
                row.clip_fraction = l.clipped;
                row.loss = l.loss;
            }
            Err(PpoError::NonFiniteLoss { epoch, minibatch }) => {
                eprintln!(
                    "update {}: non-finite loss (epoch {epoch}, minibatch {minibatch}); keeping previous parameters",
                    self.updates
                );
                row.skipped = 1;
            }
            Err(PpoError::Net(e)) => return Err(e.into()),
        }
        Ok(row)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let mut meta = CheckpointMeta::new(self.net.shape, self.cfg.ppo.clone(), self.cfg.seed);
        meta.updates = self.updates;
        meta.env_steps = self.env_steps;
        Checkpoint {
            meta,
            net: self.net.clone(),
            optimizer: Some(self.adam.clone()),
        }
    }

    pub fn save_checkpoint(&self) -> Result<PathBuf, TrainError> {
        let dir = self.dir.join(CHECKPOINT_DIR);
        fs::create_dir_all(&dir)?;
        let path = dir.join(checkpoint_name(self.updates));
        self.checkpoint().save(&path)?;
        Ok(path)
    }

    /// Runs until the configured number of updates (or `limit` more
    /// updates) is reached, logging every update and saving checkpoints on
    /// the configured cadence and at the end.
    pub fn run(&mut self, limit: Option<u64>, mut on_update: impl FnMut(&MetricsRow)) -> Result<TrainSummary, TrainError> {
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join(RUN_CONFIG_FILE), self.cfg.to_toml())?;
        let mut metrics = MetricsLog::open(&self.dir.join(METRICS_FILE), self.updates)?;
        let stop = limit.map_or(u64::MAX, |l| self.updates + l);
        let mut last_saved = None;
        while !self.is_finished() && self.updates < stop {
            let row = self.step()?;
            metrics.append(&row)?;
            on_update(&row);
            if self.updates % self.cfg.train.checkpoint_every == 0 || self.is_finished() {
                last_saved = Some(self.save_checkpoint()?);
            }
        }
        if last_saved.is_none() && self.updates > 0 {
            last_saved = Some(self.save_checkpoint()?);
        }
        Ok(TrainSummary {
            updates: self.updates,
            env_steps: self.env_steps,
            checkpoint: last_saved,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub updates: u64,
    pub env_steps: u64,
    pub checkpoint: Option<PathBuf>,
}

pub fn checkpoint_name(updates: u64) -> String {
    format!("update-{updates:06}.ckpt")
}

/// `(updates, path)` for every checkpoint in a run directory, oldest first.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(u64, PathBuf)>, io::Error> {
    let dir = dir.join(CHECKPOINT_DIR);
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut found = Vec::new();
    for entry in fs::read_dir(&dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(n) = name.strip_prefix("update-").and_then(|r| r.strip_suffix(".ckpt")) {
            if let Ok(u) = n.parse() {
                found.push((u, path));
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn latest_checkpoint(dir: &Path) -> Result<Option<PathBuf>, io::Error> {
    Ok(list_checkpoints(dir)?.pop().map(|(_, p)| p))
}

/// Append-only metrics CSV. Opening for a resumed run drops rows past the
/// checkpoint so the log continues at the next update.
struct MetricsLog {
    writer: csv::Writer<fs::File>,
}

impl MetricsLog {
    fn open(path: &Path, resume_after: u64) -> Result<MetricsLog, TrainError> {
        let mut kept = Vec::new();
        if resume_after > 0 && path.exists() {
            let mut reader = csv::Reader::from_path(path)?;
            for row in reader.deserialize::<MetricsRow>() {
                let row = row?;
                if row.update <= resume_after {
                    kept.push(row);
                }
            }
        }
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
        writer.write_record(METRICS_COLUMNS)?;
        for row in &kept {
            writer.serialize(row)?;
        }
        writer.flush()?;
        Ok(MetricsLog { writer })
    }

    fn append(&mut self, row: &MetricsRow) -> Result<(), TrainError> {
        self.writer.serialize(row)?;
        self.writer.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, csv::Error> {
    csv::Reader::from_path(path)?.deserialize().collect()
}
