//! Gaussian actor-critic policy over the walker's phase observation.
//!
//! The actor maps the 4-dim observation to torque means through a
//! 4-64-64-2 tanh MLP; the action distribution is a diagonal Gaussian
//! with state-independent learnable log standard deviations. The critic
//! is an independent 4-64-64-1 tanh MLP.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::plant::Control;
use crate::rl::net::{orthogonal, Mlp, MlpCache};

pub const OBS_DIM: usize = 4;
pub const ACTION_DIM: usize = 2;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.8378770664093453;

/// All learnable parameters of the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub actor: Mlp,
    pub log_std: [f64; ACTION_DIM],
    pub critic: Mlp,
}

impl PolicyParams {
    /// Orthogonal-style initialization: hidden layers with gain sqrt(2),
    /// the actor head with a small 0.01 gain, the critic head with 1.0;
    /// biases and log-stds start at zero.
    pub fn init(rng: &mut ChaCha8Rng) -> Self {
        let mut actor = Mlp::zeros(&[OBS_DIM, 64, 64, ACTION_DIM]);
        let mut critic = Mlp::zeros(&[OBS_DIM, 64, 64, 1]);
        let hidden_gain = 2f64.sqrt();
        for (net, head_gain) in [(&mut actor, 0.01), (&mut critic, 1.0)] {
            let n = net.layers.len();
            for (k, layer) in net.layers.iter_mut().enumerate() {
                let gain = if k + 1 == n { head_gain } else { hidden_gain };
                layer.w = orthogonal(layer.out_dim, layer.in_dim, gain, rng);
            }
        }
        Self { actor, log_std: [0.0; ACTION_DIM], critic }
    }

    /// Per-dimension standard deviations with the log-std clamp applied.
    pub fn stds(&self) -> [f64; ACTION_DIM] {
        let mut out = [0.0; ACTION_DIM];
        for (o, ls) in out.iter_mut().zip(&self.log_std) {
            *o = ls.clamp(LOG_STD_MIN, LOG_STD_MAX).exp();
        }
        out
    }

    pub fn action_mean(&self, obs: &[f64; OBS_DIM]) -> [f64; ACTION_DIM] {
        let out = self.actor.forward(obs);
        [out[0], out[1]]
    }

    /// Deterministic control (the Gaussian mean).
    pub fn mean_control(&self, obs: &[f64; OBS_DIM]) -> Control {
        let mean = self.action_mean(obs);
        Control::new(mean[0], mean[1])
    }

    pub fn value(&self, obs: &[f64; OBS_DIM]) -> f64 {
        self.critic.forward(obs)[0]
    }

    /// Samples (or takes the mean of) the action distribution. The raw
    /// sample is returned unclipped; torque saturation happens at the
    /// environment boundary and the log-probability refers to the
    /// unclipped sample.
    pub fn act(
        &self,
        obs: &[f64; OBS_DIM],
        stochastic: bool,
        rng: &mut ChaCha8Rng,
    ) -> ActionSample {
        let mean = self.action_mean(obs);
        let stds = self.stds();
        let mut action = mean;
        if stochastic {
            for i in 0..ACTION_DIM {
                let z: f64 = rng.sample(StandardNormal);
                action[i] = mean[i] + stds[i] * z;
            }
        }
        let log_prob = gaussian_log_prob(&action, &mean, &stds);
        let value = self.value(obs);
        ActionSample { action, log_prob, value }
    }

    /// Differential entropy of the diagonal Gaussian.
    pub fn entropy(&self) -> f64 {
        self.log_std
            .iter()
            .map(|ls| 0.5 * (1.0 + LN_2PI) + ls.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .sum()
    }

    pub fn n_params(&self) -> usize {
        let count = |net: &Mlp| net.layers.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>();
        count(&self.actor) + ACTION_DIM + count(&self.critic)
    }

    /// Flattens all parameters into one vector: actor layers (w then b),
    /// log-stds, critic layers (w then b). The optimizer, gradient
    /// clipping and finite-difference tests share this layout.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_params());
        for layer in &self.actor.layers {
            flat.extend_from_slice(&layer.w);
            flat.extend_from_slice(&layer.b);
        }
        flat.extend_from_slice(&self.log_std);
        for layer in &self.critic.layers {
            flat.extend_from_slice(&layer.w);
            flat.extend_from_slice(&layer.b);
        }
        flat
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        let mut at = 0;
        let mut copy = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[at..at + dst.len()]);
            at += dst.len();
        };
        for layer in &mut self.actor.layers {
            copy(&mut layer.w);
            copy(&mut layer.b);
        }
        copy(&mut self.log_std);
        for layer in &mut self.critic.layers {
            copy(&mut layer.w);
            copy(&mut layer.b);
        }
    }

    /// Shape sanity check used when loading checkpoints.
    pub fn shapes_valid(&self) -> bool {
        let net_ok = |net: &Mlp, out: usize| {
            net.layers.len() == 3
                && net.layers.iter().all(|l| l.shape_consistent())
                && net.layers[0].in_dim == OBS_DIM
                && net.layers[2].out_dim == out
                && net.layers[0].out_dim == net.layers[1].in_dim
                && net.layers[1].out_dim == net.layers[2].in_dim
        };
        net_ok(&self.actor, ACTION_DIM) && net_ok(&self.critic, 1)
    }
}

/// Result of one policy query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSample {
    pub action: [f64; ACTION_DIM],
    pub log_prob: f64,
    pub value: f64,
}

impl ActionSample {
    pub fn control(&self) -> Control {
        Control::new(self.action[0], self.action[1])
    }
}

/// Log-density of a diagonal Gaussian.
pub fn gaussian_log_prob(
    action: &[f64; ACTION_DIM],
    mean: &[f64; ACTION_DIM],
    stds: &[f64; ACTION_DIM],
) -> f64 {
    let mut lp = 0.0;
    for i in 0..ACTION_DIM {
        let z = (action[i] - mean[i]) / stds[i];
        lp += -0.5 * z * z - stds[i].ln() - 0.5 * LN_2PI;
    }
    lp
}

/// Scratch buffers reused across policy forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct PolicyCache {
    pub actor: MlpCache,
    pub critic: MlpCache,
}
