//! Clipped-surrogate policy optimization with a Gaussian actor-critic.
//!
//! Training alternates on-policy collection (auto-resetting episodes)
//! with several epochs of minibatch updates on the clipped objective
//!
//! ```text
//! maximize  min(ratio * A, clip(ratio, 1 - eps, 1 + eps) * A)
//!           - value_coef * (V - returns)^2 + entropy_coef * H
//! ```
//!
//! Gradients are computed analytically (see `net`), globally norm-clipped
//! and applied with Adam. A run is a pure function of its configs and
//! seed: same inputs give identical logs and parameters.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{rollout, Env, EnvConfig, EnvError, EpisodeTrace};
use crate::plant::Control;
use crate::rl::buffer::{compute_gae, normalize_advantages, RolloutBuffer};
use crate::rl::net::{clip_grad_norm, Adam};
use crate::rl::policy::{
    gaussian_log_prob, PolicyCache, PolicyParams, ACTION_DIM, LOG_STD_MAX, LOG_STD_MIN,
};

/// PPO hyperparameters; defaults follow the reference implementation's
/// documented defaults for continuous control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_steps: u64,
    /// Environment steps collected per update.
    pub n_steps: usize,
    pub minibatch_size: usize,
    pub epochs_per_update: u32,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
    /// Run a deterministic evaluation episode every this many updates
    /// (0 disables periodic evaluation).
    pub eval_period_updates: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 500_000,
            n_steps: 2048,
            minibatch_size: 64,
            epochs_per_update: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.0,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            seed: 0,
            eval_period_updates: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::InvalidConfig(msg));
        if self.total_steps == 0 {
            return bad("total_steps must be positive".into());
        }
        if self.n_steps == 0
            || self.minibatch_size == 0
            || !self.n_steps.is_multiple_of(self.minibatch_size)
        {
            return bad(format!(
                "n_steps {} must be a positive multiple of minibatch_size {}",
                self.n_steps, self.minibatch_size
            ));
        }
        if !self.gamma.is_finite() || self.gamma <= 0.0 || self.gamma > 1.0 {
            return bad(format!("gamma must be in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda must be in [0, 1], got {}", self.gae_lambda));
        }
        if !self.clip_eps.is_finite() || self.clip_eps <= 0.0 {
            return bad(format!("clip_eps must be positive, got {}", self.clip_eps));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs_per_update == 0 {
            return bad("epochs_per_update must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at update {update}; log flushed up to failure")]
    NonFiniteLoss { update: u32, log: Box<TrainLog> },
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Averaged diagnostics of one policy update.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// One completed training episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeRecord {
    /// Global environment step at which the episode ended.
    pub step: u64,
    pub episode: u32,
    pub ret: f64,
    pub length: u32,
    /// Hip x position at the episode's final step.
    pub distance: f64,
}

/// One policy update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateRecord {
    pub update: u32,
    pub step: u64,
    pub metrics: UpdateMetrics,
    /// Mean return of episodes completed during this update's collection
    /// phase, if any finished.
    pub rollout_return_mean: Option<f64>,
}

/// One deterministic evaluation episode run during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub update: u32,
    pub step: u64,
    pub ret: f64,
    pub distance: f64,
}

/// Everything a training run reports.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub episodes: Vec<EpisodeRecord>,
    pub updates: Vec<UpdateRecord>,
    pub evals: Vec<EvalRecord>,
}

/// Result of a completed training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: PolicyParams,
    pub log: TrainLog,
}

/// Mean loss over a minibatch; the pure-evaluation twin of
/// [`minibatch_grad`], used by finite-difference checks.
pub fn minibatch_loss(
    policy: &PolicyParams,
    buffer: &RolloutBuffer,
    indices: &[usize],
    cfg: &TrainConfig,
) -> f64 {
    let stds = policy.stds();
    let mut total = 0.0;
    for &i in indices {
        let obs = &buffer.observations[i];
        let mean = policy.action_mean(obs);
        let logp = gaussian_log_prob(&buffer.actions[i], &mean, &stds);
        let ratio = (logp - buffer.log_probs[i]).exp();
        let adv = buffer.advantages[i];
        let surr1 = ratio * adv;
        let surr2 = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        let value = policy.value(obs);
        let value_err = value - buffer.returns[i];
        total += -surr1.min(surr2) + cfg.value_coef * value_err * value_err
            - cfg.entropy_coef * policy.entropy();
    }
    total / indices.len() as f64
}

/// Analytic gradient of [`minibatch_loss`] in the flat parameter layout,
/// together with the update diagnostics of the minibatch.
pub fn minibatch_grad(
    policy: &PolicyParams,
    buffer: &RolloutBuffer,
    indices: &[usize],
    cfg: &TrainConfig,
    cache: &mut PolicyCache,
) -> (UpdateMetrics, f64, Vec<f64>) {
    let mut actor_grads = policy.actor.grads_like();
    let mut critic_grads = policy.critic.grads_like();
    let mut log_std_grads = [0.0; ACTION_DIM];
    let stds = policy.stds();

    let mut loss_sum = 0.0;
    let mut policy_loss_sum = 0.0;
    let mut value_loss_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut clipped = 0usize;

    for &i in indices {
        let obs = &buffer.observations[i];
        policy.actor.forward_cached(obs, &mut cache.actor);
        policy.critic.forward_cached(obs, &mut cache.critic);
        let mean_out = cache.actor.post.last().unwrap();
        let mean = [mean_out[0], mean_out[1]];
        let value = cache.critic.post.last().unwrap()[0];

        let logp = gaussian_log_prob(&buffer.actions[i], &mean, &stds);
        let ratio = (logp - buffer.log_probs[i]).exp();
        let adv = buffer.advantages[i];
        let surr1 = ratio * adv;
        let surr2 = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * adv;
        let unclipped_active = surr1 <= surr2;

        // d(policy loss)/d(logp): -A * ratio on the unclipped branch,
        // zero where the clipped branch is active (its slope in ratio is
        // zero outside the clip band).
        let dloss_dlogp = if unclipped_active { -adv * ratio } else { 0.0 };

        let mut grad_mean = [0.0; ACTION_DIM];
        for j in 0..ACTION_DIM {
            let z = (buffer.actions[i][j] - mean[j]) / stds[j];
            grad_mean[j] = dloss_dlogp * z / stds[j];
            let inside = policy.log_std[j] > LOG_STD_MIN && policy.log_std[j] < LOG_STD_MAX;
            if inside {
                log_std_grads[j] += dloss_dlogp * (z * z - 1.0) - cfg.entropy_coef;
            }
        }
        policy.actor.backward(obs, &cache.actor, &grad_mean, &mut actor_grads);

        let value_err = value - buffer.returns[i];
        let dloss_dv = cfg.value_coef * 2.0 * value_err;
        policy.critic.backward(obs, &cache.critic, &[dloss_dv], &mut critic_grads);

        let sample_policy_loss = -surr1.min(surr2);
        loss_sum += sample_policy_loss + cfg.value_coef * value_err * value_err
            - cfg.entropy_coef * policy.entropy();
        policy_loss_sum += sample_policy_loss;
        value_loss_sum += value_err * value_err;
        kl_sum += (ratio - 1.0) - ratio.ln();
        if (ratio - 1.0).abs() > cfg.clip_eps {
            clipped += 1;
        }
    }

    let n = indices.len() as f64;
    let mut flat = Vec::with_capacity(policy.n_params());
    for (w, b) in actor_grads.w.iter().zip(&actor_grads.b) {
        flat.extend(w.iter().map(|g| g / n));
        flat.extend(b.iter().map(|g| g / n));
    }
    flat.extend(log_std_grads.iter().map(|g| g / n));
    for (w, b) in critic_grads.w.iter().zip(&critic_grads.b) {
        flat.extend(w.iter().map(|g| g / n));
        flat.extend(b.iter().map(|g| g / n));
    }

    let metrics = UpdateMetrics {
        policy_loss: policy_loss_sum / n,
        value_loss: value_loss_sum / n,
        approx_kl: kl_sum / n,
        clip_fraction: clipped as f64 / n,
    };
    (metrics, loss_sum / n, flat)
}

/// One full PPO update over a collected buffer: normalizes advantages,
/// then runs shuffled minibatch gradient steps for the configured number
/// of epochs. Metrics are averaged over all minibatches.
pub fn ppo_update(
    policy: &mut PolicyParams,
    opt: &mut Adam,
    buffer: &mut RolloutBuffer,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateMetrics, PpoStepError> {
    normalize_advantages(buffer);
    let mut indices: Vec<usize> = (0..buffer.len()).collect();
    let mut cache = PolicyCache::default();
    let mut agg = UpdateMetrics::default();
    let mut batches = 0usize;
    for _ in 0..cfg.epochs_per_update {
        indices.shuffle(rng);
        for chunk in indices.chunks(cfg.minibatch_size) {
            let (metrics, loss, mut grads) = minibatch_grad(policy, buffer, chunk, cfg, &mut cache);
            if !loss.is_finite() {
                return Err(PpoStepError::NonFiniteLoss);
            }
            clip_grad_norm(&mut grads, cfg.max_grad_norm);
            let mut flat = policy.to_flat();
            opt.step(&mut flat, &grads);
            policy.set_from_flat(&flat);
            agg.policy_loss += metrics.policy_loss;
            agg.value_loss += metrics.value_loss;
            agg.approx_kl += metrics.approx_kl;
            agg.clip_fraction += metrics.clip_fraction;
            batches += 1;
        }
    }
    let n = batches as f64;
    Ok(UpdateMetrics {
        policy_loss: agg.policy_loss / n,
        value_loss: agg.value_loss / n,
        approx_kl: agg.approx_kl / n,
        clip_fraction: agg.clip_fraction / n,
    })
}

/// Failure local to one update step.
#[derive(Debug, Error)]
pub enum PpoStepError {
    #[error("non-finite loss")]
    NonFiniteLoss,
}

/// Runs PPO until `total_steps` environment steps have been collected.
pub fn train(env_config: &EnvConfig, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut policy = PolicyParams::init(&mut rng);
    let mut opt = Adam::new(cfg.learning_rate, policy.n_params());
    let mut env = Env::new(env_config.clone())?;
    let mut obs = env.reset();
    let mut buffer = RolloutBuffer::with_capacity(cfg.n_steps);
    let mut log = TrainLog::default();

    let mut global_step: u64 = 0;
    let mut episode_idx: u32 = 0;
    let mut episode_return = 0.0;
    let mut episode_len: u32 = 0;
    let mut update_idx: u32 = 0;

    while global_step < cfg.total_steps {
        buffer.clear();
        let episodes_before = log.episodes.len();
        for t in 0..cfg.n_steps {
            let sample = policy.act(&obs, true, &mut rng);
            if t > 0 && !buffer.terminated[t - 1] && !buffer.truncated[t - 1] {
                buffer.next_values[t - 1] = sample.value;
            }
            let result = env.step(sample.control())?;
            global_step += 1;
            episode_return += result.reward;
            episode_len += 1;
            buffer.push(
                obs,
                sample.action,
                sample.log_prob,
                result.reward,
                sample.value,
                result.terminated,
                result.truncated,
            );
            if result.terminated || result.truncated {
                if result.truncated {
                    buffer.next_values[t] = policy.value(&result.observation);
                }
                log.episodes.push(EpisodeRecord {
                    step: global_step,
                    episode: episode_idx,
                    ret: episode_return,
                    length: episode_len,
                    distance: result.info.hip.px,
                });
                episode_idx += 1;
                episode_return = 0.0;
                episode_len = 0;
                obs = env.reset();
            } else {
                obs = result.observation;
            }
        }
        let bootstrap = policy.value(&obs);
        compute_gae(&mut buffer, cfg.gamma, cfg.gae_lambda, bootstrap);

        let window = &log.episodes[episodes_before..];
        let rollout_return_mean = if window.is_empty() {
            None
        } else {
            Some(window.iter().map(|e| e.ret).sum::<f64>() / window.len() as f64)
        };

        let metrics = match ppo_update(&mut policy, &mut opt, &mut buffer, cfg, &mut rng) {
            Ok(m) => m,
            Err(PpoStepError::NonFiniteLoss) => {
                return Err(TrainError::NonFiniteLoss { update: update_idx, log: Box::new(log) })
            }
        };
        update_idx += 1;
        log.updates.push(UpdateRecord {
            update: update_idx,
            step: global_step,
            metrics,
            rollout_return_mean,
        });

        if cfg.eval_period_updates > 0 && update_idx.is_multiple_of(cfg.eval_period_updates) {
            let eval = evaluate(&policy, env_config, 1)?;
            log.evals.push(EvalRecord {
                update: update_idx,
                step: global_step,
                ret: eval.mean_return,
                distance: eval.mean_distance,
            });
        }
    }

    // Evaluate the final policy unless the loop already did.
    if cfg.eval_period_updates > 0 && !update_idx.is_multiple_of(cfg.eval_period_updates) {
        let eval = evaluate(&policy, env_config, 1)?;
        log.evals.push(EvalRecord {
            update: update_idx,
            step: global_step,
            ret: eval.mean_return,
            distance: eval.mean_distance,
        });
    }

    Ok(TrainOutcome { policy, log })
}

/// Deterministic evaluation metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalMetrics {
    pub mean_return: f64,
    pub mean_distance: f64,
    pub episodes: u32,
}

/// Runs deterministic-mode episodes (the Gaussian mean as control) and
/// reports the average return and final hip x. With no randomness every
/// episode is identical; repeated calls give identical results.
pub fn evaluate(
    policy: &PolicyParams,
    env_config: &EnvConfig,
    episodes: u32,
) -> Result<EvalMetrics, EnvError> {
    evaluate_controller(env_config, |s| policy.mean_control(&s.phase()), episodes)
}

/// Evaluation pathway shared by policies and hand-written controllers.
pub fn evaluate_controller<F>(
    env_config: &EnvConfig,
    mut controller: F,
    episodes: u32,
) -> Result<EvalMetrics, EnvError>
where
    F: FnMut(&crate::plant::WalkerState) -> Control,
{
    let mut total_return = 0.0;
    let mut total_distance = 0.0;
    for _ in 0..episodes.max(1) {
        let trace: EpisodeTrace = rollout(env_config, &mut controller, env_config.horizon)?;
        total_return += trace.total_reward();
        total_distance += trace.distance();
    }
    let n = episodes.max(1) as f64;
    Ok(EvalMetrics {
        mean_return: total_return / n,
        mean_distance: total_distance / n,
        episodes: episodes.max(1),
    })
}

pub const LEARNING_LOG_HEADER: &str =
    "step,episode,return,length,distance,policy_loss,value_loss,approx_kl,clip_fraction";

/// One parsed learning-log row (one training episode with the metrics of
/// the most recent policy update at that time).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningLogRow {
    pub step: u64,
    pub episode: u32,
    pub ret: f64,
    pub length: u32,
    pub distance: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl TrainLog {
    /// Serializes the per-episode log; each row carries the diagnostics
    /// of the last update completed before the episode ended (zeros
    /// before the first update).
    pub fn write_episode_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", LEARNING_LOG_HEADER)?;
        let mut u = 0usize;
        for e in &self.episodes {
            while u < self.updates.len() && self.updates[u].step <= e.step {
                u += 1;
            }
            let m = if u == 0 { UpdateMetrics::default() } else { self.updates[u - 1].metrics };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                e.step,
                e.episode,
                e.ret,
                e.length,
                e.distance,
                m.policy_loss,
                m.value_loss,
                m.approx_kl,
                m.clip_fraction
            )?;
        }
        Ok(())
    }
}

/// Parses a learning-log CSV back into rows.
pub fn read_learning_log_csv<R: BufRead>(r: R) -> std::io::Result<Vec<LearningLogRow>> {
    let bad = |msg: String| std::io::Error::new(std::io::ErrorKind::InvalidData, msg);
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != LEARNING_LOG_HEADER {
                return Err(bad(format!("unexpected learning-log header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(bad(format!("expected 9 fields, got {} in line {i}", f.len())));
        }
        let parse_f = |j: usize| -> std::io::Result<f64> {
            f[j].parse().map_err(|e| bad(format!("field {j} line {i}: {e}")))
        };
        rows.push(LearningLogRow {
            step: f[0].parse().map_err(|e| bad(format!("step line {i}: {e}")))?,
            episode: f[1].parse().map_err(|e| bad(format!("episode line {i}: {e}")))?,
            ret: parse_f(2)?,
            length: f[3].parse().map_err(|e| bad(format!("length line {i}: {e}")))?,
            distance: parse_f(4)?,
            policy_loss: parse_f(5)?,
            value_loss: parse_f(6)?,
            approx_kl: parse_f(7)?,
            clip_fraction: parse_f(8)?,
        });
    }
    Ok(rows)
}
