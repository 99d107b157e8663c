//! Clipped-surrogate PPO with generalized advantage estimation.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::action::{ActionIndex, ActionMask, NUM_ACTIONS};
use crate::adam::Adam;
use crate::encoder::{EncodedState, ENCODING_LEN};
use crate::net::{NetError, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Hyperparameters {
    /// Games played in parallel (N).
    pub parallel_games: usize,
    /// Environment steps per game per segment (T).
    pub steps_per_segment: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// Samples per gradient step (M).
    pub minibatch_size: usize,
    /// Passes over each batch (K).
    pub epochs: usize,
    /// a1
    pub value_coef: f64,
    /// a2
    pub entropy_coef: f64,
    /// Initial Adam step size, annealed linearly to zero.
    pub learning_rate: f64,
    /// Initial clip range, annealed linearly to zero.
    pub clip_range: f64,
    pub total_steps: u64,
    /// Environment steps over which the learning rate and clip range decay
    /// to zero; `None` means `total_steps`. A longer horizon lets a short
    /// run follow the opening stretch of a long schedule.
    pub anneal_steps: Option<u64>,
    pub normalize_advantages: bool,
    /// Rescale each minibatch gradient to at most this L2 norm.
    pub max_grad_norm: Option<f64>,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            parallel_games: 48,
            steps_per_segment: 20,
            gamma: 0.995,
            lambda: 0.95,
            minibatch_size: 240,
            epochs: 4,
            value_coef: 0.5,
            entropy_coef: 0.02,
            learning_rate: 0.00025,
            clip_range: 0.2,
            total_steps: 150_000_000,
            anneal_steps: None,
            normalize_advantages: true,
            max_grad_norm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HyperparameterError {
    #[error("{0} must be positive")]
    NotPositive(&'static str),
    #[error("{0} must lie in (0, 1]")]
    OutOfUnitInterval(&'static str),
    #[error("batch size {batch} is not divisible by minibatch size {minibatch}")]
    Indivisible { batch: usize, minibatch: usize },
    #[error("step count {total} is less than one batch of {batch}")]
    LessThanOneBatch { total: u64, batch: usize },
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), HyperparameterError> {
        use HyperparameterError::*;
        let counts = [
            ("parallel_games", self.parallel_games),
            ("steps_per_segment", self.steps_per_segment),
            ("minibatch_size", self.minibatch_size),
            ("epochs", self.epochs),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(NotPositive(name));
            }
        }
        let coefficients = [
            ("value_coef", self.value_coef),
            ("entropy_coef", self.entropy_coef),
            ("learning_rate", self.learning_rate),
            ("clip_range", self.clip_range),
        ];
        for (name, v) in coefficients {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NotPositive(name));
            }
        }
        if let Some(norm) = self.max_grad_norm {
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(NotPositive("max_grad_norm"));
            }
        }
        for (name, v) in [("gamma", self.gamma), ("lambda", self.lambda)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(OutOfUnitInterval(name));
            }
        }
        if self.total_steps == 0 {
            return Err(NotPositive("total_steps"));
        }
        if self.total_steps < self.batch_size() as u64 {
            return Err(LessThanOneBatch {
                total: self.total_steps,
                batch: self.batch_size(),
            });
        }
        if let Some(total) = self.anneal_steps.filter(|&a| a < self.batch_size() as u64) {
            return Err(LessThanOneBatch {
                total,
                batch: self.batch_size(),
            });
        }
        if self.batch_size() % self.minibatch_size != 0 {
            return Err(Indivisible {
                batch: self.batch_size(),
                minibatch: self.minibatch_size,
            });
        }
        Ok(())
    }

    /// Samples per update, N * T.
    pub fn batch_size(&self) -> usize {
        self.parallel_games * self.steps_per_segment
    }

    /// Number of updates in a full run (partial final batches are dropped).
    pub fn num_updates(&self) -> u64 {
        self.total_steps / self.batch_size() as u64
    }

    /// Updates over which annealing runs.
    pub fn anneal_updates(&self) -> u64 {
        self.anneal_steps.unwrap_or(self.total_steps) / self.batch_size() as u64
    }

    /// Annealing progress in `[0, 1]` before update `update` (0-based).
    pub fn progress(&self, update: u64) -> f64 {
        let total = self.anneal_updates();
        if total == 0 {
            1.0
        } else {
            (update as f64 / total as f64).min(1.0)
        }
    }

    /// `(learning rate, clip range)` at the given progress.
    pub fn annealed(&self, progress: f64) -> (f64, f64) {
        let remaining = 1.0 - progress.clamp(0.0, 1.0);
        (self.learning_rate * remaining, self.clip_range * remaining)
    }
}

/// One decision taken during self-play.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub state: EncodedState,
    pub mask: ActionMask,
    pub action: ActionIndex,
    pub log_prob_old: f32,
    pub value_old: f32,
    pub reward: f32,
    pub done: bool,
    pub advantage: f32,
    pub return_target: f32,
}

/// Advantages for one ordered trajectory by the backward recursion
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}` with
/// `delta_t = r_t + gamma * (1 - done_t) * V_{t+1} - V_t` and `V_T = bootstrap`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let n = rewards.len();
    assert!(values.len() == n && dones.len() == n, "buffer lengths differ");
    let mut advantages = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_advantage = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_value - values[t];
        next_advantage = delta + gamma * lambda * live * next_advantage;
        advantages[t] = next_advantage;
        next_value = values[t];
    }
    advantages
}

/// Fills `advantage` and `return_target` for one seat's ordered samples.
pub fn fill_advantages(samples: &mut [TrajectorySample], bootstrap: f64, gamma: f64, lambda: f64) {
    let rewards: Vec<f64> = samples.iter().map(|s| s.reward as f64).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.value_old as f64).collect();
    let dones: Vec<bool> = samples.iter().map(|s| s.done).collect();
    let adv = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
    for ((s, a), v) in samples.iter_mut().zip(adv).zip(values) {
        s.advantage = a as f32;
        s.return_target = (a + v) as f32;
    }
}

/// Loss weights for one gradient step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefficients {
    pub clip_range: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// Minibatch columns, row `i` of every slice belonging to sample `i`.
#[derive(Debug, Clone, Copy)]
pub struct MinibatchRef<'a, T> {
    /// `len x ENCODING_LEN`
    pub inputs: &'a [T],
    /// `len x NUM_ACTIONS`, additive 0 / -inf.
    pub masks: &'a [T],
    pub actions: &'a [ActionIndex],
    pub old_log_probs: &'a [T],
    pub advantages: &'a [T],
    pub returns: &'a [T],
}

impl<T> MinibatchRef<'_, T> {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Per-sample sums of the loss terms; divide by `samples` for means.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub samples: usize,
    /// Clipped surrogate (maximised).
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// `(r - 1) - ln r`, a non-negative KL estimate.
    pub approx_kl: f64,
    pub clipped: f64,
    /// `-surrogate + a1 * value_loss - a2 * entropy` (minimised).
    pub loss: f64,
}

impl LossStats {
    pub fn merge(&mut self, other: &LossStats) {
        self.samples += other.samples;
        self.surrogate += other.surrogate;
        self.value_loss += other.value_loss;
        self.entropy += other.entropy;
        self.approx_kl += other.approx_kl;
        self.clipped += other.clipped;
        self.loss += other.loss;
    }

    pub fn mean(&self) -> LossStats {
        let n = self.samples.max(1) as f64;
        LossStats {
            samples: self.samples,
            surrogate: self.surrogate / n,
            value_loss: self.value_loss / n,
            entropy: self.entropy / n,
            approx_kl: self.approx_kl / n,
            clipped: self.clipped / n,
            loss: self.loss / n,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.surrogate,
            self.value_loss,
            self.entropy,
            self.approx_kl,
            self.loss,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Adds `scale * d(sum of per-sample losses)/d(params)` into `grads` and
/// returns the unscaled loss sums.
pub fn minibatch_gradient<T: Scalar>(
    net: &Network<T>,
    mb: MinibatchRef<'_, T>,
    coeffs: LossCoefficients,
    scale: T,
    grads: &mut Network<T>,
) -> Result<LossStats, NetError> {
    let b = mb.len();
    let actions = net.shape.actions;
    let cache = net.forward_batch(mb.inputs, mb.masks, b)?;
    let mut d_logits = vec![T::zero(); b * actions];
    let mut d_values = vec![T::zero(); b];
    let mut stats = LossStats {
        samples: b,
        ..LossStats::default()
    };
    let eps = coeffs.clip_range;
    let a1 = T::lit(coeffs.value_coef);
    let a2 = T::lit(coeffs.entropy_coef);

    for i in 0..b {
        let probs = cache.probs_row(i);
        let log_probs = cache.log_probs_row(i);
        let a = mb.actions[i].value();
        let logp = log_probs[a].as_f64();
        let ratio = libm::exp(logp - mb.old_log_probs[i].as_f64());
        let adv = mb.advantages[i].as_f64();
        let clipped_ratio = ratio.clamp(1.0 - eps, 1.0 + eps);
        let surrogate = (ratio * adv).min(clipped_ratio * adv);
        let clipped = (adv > 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps);
        // d surrogate / d log pi(a)
        let ds = if clipped { 0.0 } else { ratio * adv };

        let entropy = crate::net::masked_entropy(probs, log_probs);
        let v = cache.values[i];
        let v_err = v - mb.returns[i];

        stats.surrogate += surrogate;
        stats.value_loss += (v_err * v_err).as_f64();
        stats.entropy += entropy.as_f64();
        stats.approx_kl += (ratio - 1.0) - (logp - mb.old_log_probs[i].as_f64());
        stats.clipped += if (ratio - 1.0).abs() > eps { 1.0 } else { 0.0 };

        let row = &mut d_logits[i * actions..(i + 1) * actions];
        let ds = T::lit(ds);
        for j in 0..actions {
            let p = probs[j];
            if p > T::zero() {
                let indicator = if j == a { T::one() } else { T::zero() };
                let policy = -ds * (indicator - p);
                let bonus = a2 * p * (log_probs[j] + entropy);
                row[j] = scale * (policy + bonus);
            }
        }
        d_values[i] = scale * (a1 + a1) * v_err;
    }
    stats.loss = -stats.surrogate + coeffs.value_coef * stats.value_loss - coeffs.entropy_coef * stats.entropy;
    net.backward(mb.inputs, &cache, &d_logits, &d_values, grads)?;
    Ok(stats)
}

/// A batch laid out for training, with advantages already normalised if
/// requested.
#[derive(Debug, Clone)]
pub struct TrainingBatch<T> {
    pub inputs: Vec<T>,
    pub masks: Vec<T>,
    pub actions: Vec<ActionIndex>,
    pub old_log_probs: Vec<T>,
    pub advantages: Vec<T>,
    pub returns: Vec<T>,
}

impl<T: Scalar> TrainingBatch<T> {
    pub fn from_samples(samples: &[TrajectorySample], normalize_advantages: bool) -> TrainingBatch<T> {
        let n = samples.len();
        let mut inputs = vec![T::zero(); n * ENCODING_LEN];
        let mut masks = vec![T::zero(); n * NUM_ACTIONS];
        for (i, s) in samples.iter().enumerate() {
            s.state.write_to(&mut inputs[i * ENCODING_LEN..(i + 1) * ENCODING_LEN]);
            s.mask.write_additive(&mut masks[i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS]);
        }
        let mut adv: Vec<f64> = samples.iter().map(|s| s.advantage as f64).collect();
        if normalize_advantages && n > 1 {
            let mean = adv.iter().sum::<f64>() / n as f64;
            let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
            let std = libm::sqrt(var);
            for a in &mut adv {
                *a = (*a - mean) / (std + 1e-8);
            }
        }
        TrainingBatch {
            inputs,
            masks,
            actions: samples.iter().map(|s| s.action).collect(),
            old_log_probs: samples.iter().map(|s| T::lit(s.log_prob_old as f64)).collect(),
            advantages: adv.into_iter().map(T::lit).collect(),
            returns: samples.iter().map(|s| T::lit(s.return_target as f64)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn as_ref(&self) -> MinibatchRef<'_, T> {
        MinibatchRef {
            inputs: &self.inputs,
            masks: &self.masks,
            actions: &self.actions,
            old_log_probs: &self.old_log_probs,
            advantages: &self.advantages,
            returns: &self.returns,
        }
    }

    /// Copies the given rows into a new batch.
    pub fn gather(&self, rows: &[usize]) -> TrainingBatch<T> {
        let width = self.inputs.len() / self.len().max(1);
        let mask_width = self.masks.len() / self.len().max(1);
        let mut out = TrainingBatch {
            inputs: Vec::with_capacity(rows.len() * width),
            masks: Vec::with_capacity(rows.len() * mask_width),
            actions: Vec::with_capacity(rows.len()),
            old_log_probs: Vec::with_capacity(rows.len()),
            advantages: Vec::with_capacity(rows.len()),
            returns: Vec::with_capacity(rows.len()),
        };
        for &r in rows {
            out.inputs.extend_from_slice(&self.inputs[r * width..(r + 1) * width]);
            out.masks.extend_from_slice(&self.masks[r * mask_width..(r + 1) * mask_width]);
            out.actions.push(self.actions[r]);
            out.old_log_probs.push(self.old_log_probs[r]);
            out.advantages.push(self.advantages[r]);
            out.returns.push(self.returns[r]);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpoError {
    #[error("non-finite loss or gradient in epoch {epoch}, minibatch {minibatch}")]
    NonFiniteLoss { epoch: usize, minibatch: usize },
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    /// Means over every sample seen in every epoch.
    pub loss: LossStats,
    pub learning_rate: f64,
    pub clip_range: f64,
    pub minibatches: usize,
}

/// Computes the gradient of one minibatch; lets callers split the work
/// across threads.
pub trait GradientEngine<T: Scalar> {
    fn gradient(
        &mut self,
        net: &Network<T>,
        mb: MinibatchRef<'_, T>,
        coeffs: LossCoefficients,
        grads: &mut Network<T>,
    ) -> Result<LossStats, NetError>;
}

/// Whole minibatch in one pass on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SequentialGradients;

impl<T: Scalar> GradientEngine<T> for SequentialGradients {
    fn gradient(
        &mut self,
        net: &Network<T>,
        mb: MinibatchRef<'_, T>,
        coeffs: LossCoefficients,
        grads: &mut Network<T>,
    ) -> Result<LossStats, NetError> {
        let scale = T::one() / T::lit(mb.len() as f64);
        minibatch_gradient(net, mb, coeffs, scale, grads)
    }
}

/// K epochs of shuffled minibatch Adam steps on `batch`.
///
/// Works on copies: on error the caller's network and optimiser are
/// untouched. With a zero annealed learning rate no step is taken.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update<T: Scalar, R: Rng + ?Sized, E: GradientEngine<T>>(
    net: &Network<T>,
    optimizer: &Adam<T>,
    batch: &TrainingBatch<T>,
    hyper: &Hyperparameters,
    progress: f64,
    rng: &mut R,
    engine: &mut E,
) -> Result<(Network<T>, Adam<T>, UpdateStats), PpoError> {
    let (lr, clip) = hyper.annealed(progress);
    let coeffs = LossCoefficients {
        clip_range: clip,
        value_coef: hyper.value_coef,
        entropy_coef: hyper.entropy_coef,
    };
    let mut params = net.clone();
    let mut adam = optimizer.clone();
    let mut grads = Network::zeros(net.shape);
    let mut totals = LossStats::default();
    let mut minibatches = 0;
    let mut order: Vec<usize> = (0..batch.len()).collect();

    for epoch in 0..hyper.epochs {
        order.shuffle(rng);
        for (k, rows) in order.chunks(hyper.minibatch_size).enumerate() {
            let mb = batch.gather(rows);
            grads.fill(T::zero());
            let stats = engine.gradient(&params, mb.as_ref(), coeffs, &mut grads)?;
            if !stats.is_finite() || !grads.is_finite() {
                return Err(PpoError::NonFiniteLoss {
                    epoch,
                    minibatch: k,
                });
            }
            if let Some(max_norm) = hyper.max_grad_norm {
                let norm = libm::sqrt(grads.norm_sq());
                if norm > max_norm {
                    grads.scale(T::lit(max_norm / norm));
                }
            }
            if lr > 0.0 {
                adam.apply(&mut params, &grads, lr);
            }
            totals.merge(&stats);
            minibatches += 1;
        }
    }
    if !params.is_finite() {
        return Err(PpoError::NonFiniteLoss {
            epoch: hyper.epochs,
            minibatch: 0,
        });
    }
    Ok((
        params,
        adam,
        UpdateStats {
            loss: totals.mean(),
            learning_rate: lr,
            clip_range: clip,
            minibatches,
        },
    ))
}
