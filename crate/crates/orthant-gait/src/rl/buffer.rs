//! Rollout storage and generalized advantage estimation.
//!
//! One buffer holds a fixed number of on-policy transitions spanning
//! auto-resetting episodes. Advantages use GAE(gamma, lambda) computed
//! backwards over the buffer. The one-step TD error bootstraps with the
//! critic value of the actual successor state, so horizon truncation
//! bootstraps while falls do not; the lambda-chain stops at every
//! episode end.

use crate::rl::policy::{ACTION_DIM, OBS_DIM};

/// On-policy transitions of one collection phase.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub observations: Vec<[f64; OBS_DIM]>,
    pub actions: Vec<[f64; ACTION_DIM]>,
    pub log_probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub values: Vec<f64>,
    pub terminated: Vec<bool>,
    pub truncated: Vec<bool>,
    /// Critic value of the state actually reached after each step. For
    /// fall-terminated steps the entry is irrelevant (masked to zero in
    /// the TD error); for truncated steps it is the value of the final
    /// state, which provides the truncation bootstrap.
    pub next_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            observations: Vec::with_capacity(n),
            actions: Vec::with_capacity(n),
            log_probs: Vec::with_capacity(n),
            rewards: Vec::with_capacity(n),
            values: Vec::with_capacity(n),
            terminated: Vec::with_capacity(n),
            truncated: Vec::with_capacity(n),
            next_values: Vec::with_capacity(n),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn clear(&mut self) {
        self.observations.clear();
        self.actions.clear();
        self.log_probs.clear();
        self.rewards.clear();
        self.values.clear();
        self.terminated.clear();
        self.truncated.clear();
        self.next_values.clear();
        self.advantages.clear();
        self.returns.clear();
    }

    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        obs: [f64; OBS_DIM],
        action: [f64; ACTION_DIM],
        log_prob: f64,
        reward: f64,
        value: f64,
        terminated: bool,
        truncated: bool,
    ) {
        self.observations.push(obs);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.rewards.push(reward);
        self.values.push(value);
        self.terminated.push(terminated);
        self.truncated.push(truncated);
        self.next_values.push(0.0);
    }
}

/// Fills `advantages` and `returns` (returns = raw advantages + values).
///
/// `bootstrap_value` is the critic value of the state following the last
/// buffer entry; it is only consulted when the last step did not end its
/// episode.
pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64, bootstrap_value: f64) {
    let n = buffer.len();
    buffer.advantages.resize(n, 0.0);
    buffer.returns.resize(n, 0.0);
    if n == 0 {
        return;
    }
    let last = n - 1;
    if !buffer.terminated[last] && !buffer.truncated[last] {
        buffer.next_values[last] = bootstrap_value;
    }
    let mut chain = 0.0;
    for t in (0..n).rev() {
        let not_terminated = if buffer.terminated[t] { 0.0 } else { 1.0 };
        let episode_continues =
            if buffer.terminated[t] || buffer.truncated[t] { 0.0 } else { 1.0 };
        let delta =
            buffer.rewards[t] + gamma * buffer.next_values[t] * not_terminated - buffer.values[t];
        chain = delta + gamma * lambda * episode_continues * chain;
        buffer.advantages[t] = chain;
        buffer.returns[t] = chain + buffer.values[t];
    }
}

/// Normalizes advantages in place to zero mean and unit variance over the
/// whole buffer. Applied once per policy update, after returns are built.
pub fn normalize_advantages(buffer: &mut RolloutBuffer) {
    let n = buffer.advantages.len();
    if n == 0 {
        return;
    }
    let mean = buffer.advantages.iter().sum::<f64>() / n as f64;
    let var = buffer.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for a in &mut buffer.advantages {
        *a = (*a - mean) / (std + 1e-8);
    }
}
