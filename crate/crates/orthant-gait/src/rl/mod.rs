//! From-scratch PPO: networks, rollout buffer, update rule, training
//! loop, evaluation and checkpoints.

pub mod buffer;
pub mod checkpoint;
pub mod net;
pub mod policy;
pub mod ppo;

pub use buffer::{compute_gae, normalize_advantages, RolloutBuffer};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError, CHECKPOINT_VERSION};
pub use policy::{ActionSample, PolicyParams};
pub use ppo::{
    evaluate, evaluate_controller, read_learning_log_csv, train, EpisodeRecord, EvalMetrics,
    EvalRecord, LearningLogRow, TrainConfig, TrainError, TrainLog, TrainOutcome, UpdateMetrics,
    UpdateRecord, LEARNING_LOG_HEADER,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{self, EnvConfig, DEFAULT_SLOPE};
    use crate::plant::WalkerParams;
    use crate::reward::RewardSetup;
    use crate::rl::net::Adam;
    use crate::rl::policy::PolicyCache;
    use crate::rl::ppo::{minibatch_grad, minibatch_loss, ppo_update};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quick_env() -> EnvConfig {
        EnvConfig { reward_setup: RewardSetup::ForwardPlusOrthant, ..EnvConfig::default() }
    }

    fn tiny_train_config(total_steps: u64) -> TrainConfig {
        TrainConfig {
            total_steps,
            n_steps: 256,
            minibatch_size: 64,
            epochs_per_update: 2,
            eval_period_updates: 2,
            ..TrainConfig::default()
        }
    }

    /// Builds a buffer by rolling out a random policy, then freezes it
    /// with old log-probs from a *different* policy so ratios land on
    /// both sides of the clip band.
    fn frozen_buffer(n: usize) -> (PolicyParams, RolloutBuffer) {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let behavior = PolicyParams::init(&mut rng);
        let mut rng2 = ChaCha8Rng::seed_from_u64(200);
        let target = PolicyParams::init(&mut rng2);

        let mut env = env::Env::new(quick_env()).unwrap();
        let mut obs = env.reset();
        let mut buffer = RolloutBuffer::with_capacity(n);
        for t in 0..n {
            let sample = behavior.act(&obs, true, &mut rng);
            if t > 0 && !buffer.terminated[t - 1] && !buffer.truncated[t - 1] {
                buffer.next_values[t - 1] = sample.value;
            }
            let result = env.step(sample.control()).unwrap();
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
                    buffer.next_values[t] = behavior.value(&result.observation);
                }
                obs = env.reset();
            } else {
                obs = result.observation;
            }
        }
        let bootstrap = behavior.value(&obs);
        compute_gae(&mut buffer, 0.99, 0.95, bootstrap);
        normalize_advantages(&mut buffer);
        (target, buffer)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let (mut policy, buffer) = frozen_buffer(64);
        let cfg = TrainConfig { entropy_coef: 0.01, ..TrainConfig::default() };
        let indices: Vec<usize> = (0..64).collect();
        let mut cache = PolicyCache::default();
        let (_, loss, grads) = minibatch_grad(&policy, &buffer, &indices, &cfg, &mut cache);
        assert!(loss.is_finite());

        let base = policy.to_flat();
        let n = base.len();
        // Every 13th parameter plus the log-stds (the last critic offset
        // is covered by the stride).
        let mut probe: Vec<usize> = (0..n).step_by(13).collect();
        let log_std_at = policy.actor.layers.iter().map(|l| l.w.len() + l.b.len()).sum::<usize>();
        probe.push(log_std_at);
        probe.push(log_std_at + 1);

        let h = 1e-6;
        let mut checked = 0;
        for &k in &probe {
            let mut plus = base.clone();
            plus[k] += h;
            policy.set_from_flat(&plus);
            let up = minibatch_loss(&policy, &buffer, &indices, &cfg);
            let mut minus = base.clone();
            minus[k] -= h;
            policy.set_from_flat(&minus);
            let down = minibatch_loss(&policy, &buffer, &indices, &cfg);
            policy.set_from_flat(&base);
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(grads[k].abs());
            if scale < 1e-8 {
                continue; // both numerically zero
            }
            assert!(
                (grads[k] - fd).abs() <= 1e-4 * scale.max(1e-4),
                "param {k}: analytic {} vs fd {}",
                grads[k],
                fd
            );
            checked += 1;
        }
        assert!(checked > 200, "checked only {checked} parameters");
    }

    #[test]
    fn zero_advantages_leave_actor_untouched() {
        let (mut policy, mut buffer) = frozen_buffer(64);
        for a in &mut buffer.advantages {
            *a = 0.0;
        }
        let before_actor = policy.actor.clone();
        let before_log_std = policy.log_std;
        let before_critic = policy.critic.clone();
        let cfg = TrainConfig { n_steps: 64, minibatch_size: 64, ..TrainConfig::default() };
        let mut opt = Adam::new(cfg.learning_rate, policy.n_params());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        ppo_update(&mut policy, &mut opt, &mut buffer, &cfg, &mut rng).unwrap();
        // No surrogate signal and zero entropy coefficient: only the
        // critic moves.
        assert_eq!(policy.actor, before_actor);
        assert_eq!(policy.log_std, before_log_std);
        assert_ne!(policy.critic, before_critic);
    }

    #[test]
    fn on_policy_ratios_are_one() {
        // Old log-probs generated by the same policy being optimized:
        // before any update the ratio is exactly 1, so the clipped and
        // unclipped objectives coincide and nothing is clipped.
        let mut rng = ChaCha8Rng::seed_from_u64(300);
        let policy = PolicyParams::init(&mut rng);
        let mut env = env::Env::new(quick_env()).unwrap();
        let mut obs = env.reset();
        let mut buffer = RolloutBuffer::with_capacity(64);
        for _ in 0..64 {
            let sample = policy.act(&obs, true, &mut rng);
            let result = env.step(sample.control()).unwrap();
            buffer.push(
                obs,
                sample.action,
                sample.log_prob,
                result.reward,
                sample.value,
                result.terminated,
                result.truncated,
            );
            obs = if result.terminated || result.truncated {
                env.reset()
            } else {
                result.observation
            };
        }
        compute_gae(&mut buffer, 0.99, 0.95, policy.value(&obs));
        normalize_advantages(&mut buffer);
        let cfg = TrainConfig::default();
        let indices: Vec<usize> = (0..64).collect();
        let mut cache = PolicyCache::default();
        let (metrics, _, _) = minibatch_grad(&policy, &buffer, &indices, &cfg, &mut cache);
        assert_eq!(metrics.clip_fraction, 0.0);
        assert!(metrics.approx_kl.abs() < 1e-12);
        // -mean(min(rA, clip(r)A)) with r = 1 is -mean(A) = 0 after
        // normalization.
        assert!(metrics.policy_loss.abs() < 1e-9);
    }

    #[test]
    fn metric_ranges() {
        let (mut policy, mut buffer) = frozen_buffer(256);
        let cfg = TrainConfig { n_steps: 256, minibatch_size: 64, ..TrainConfig::default() };
        let mut opt = Adam::new(cfg.learning_rate, policy.n_params());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let metrics = ppo_update(&mut policy, &mut opt, &mut buffer, &cfg, &mut rng).unwrap();
        assert!((0.0..=1.0).contains(&metrics.clip_fraction));
        assert!(metrics.approx_kl > -1e-6);
        assert!(metrics.value_loss >= 0.0);
    }

    #[test]
    fn train_budget_arithmetic() {
        let cfg = tiny_train_config(256);
        let outcome = train(&quick_env(), &cfg).unwrap();
        assert_eq!(outcome.log.updates.len(), 1);
        assert!(!outcome.log.episodes.is_empty() || outcome.log.updates[0].step == 256);
        // Final evaluation recorded even though 1 % 2 != 0.
        assert_eq!(outcome.log.evals.len(), 1);
    }

    #[test]
    fn same_seed_runs_are_identical() {
        let cfg = tiny_train_config(512);
        let a = train(&quick_env(), &cfg).unwrap();
        let b = train(&quick_env(), &cfg).unwrap();
        assert_eq!(a.log, b.log);
        assert_eq!(a.policy, b.policy);
        let different = TrainConfig { seed: 1, ..cfg };
        let c = train(&quick_env(), &different).unwrap();
        assert_ne!(a.policy, c.policy);
    }

    #[test]
    fn evaluate_is_deterministic_and_matches_rollout_pathway() {
        let env_cfg = quick_env();
        let params = WalkerParams::default();
        let vg = |s: &crate::plant::WalkerState| {
            env::virtual_gravity_control(&params, s, DEFAULT_SLOPE)
        };
        let via_eval = evaluate_controller(&env_cfg, vg, 2).unwrap();
        let via_rollout = env::rollout(&env_cfg, vg, env_cfg.horizon).unwrap();
        assert_eq!(via_eval.mean_distance, via_rollout.distance());
        assert_eq!(via_eval.mean_return, via_rollout.total_reward());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let policy = PolicyParams::init(&mut rng);
        let e1 = evaluate(&policy, &env_cfg, 1).unwrap();
        let e2 = evaluate(&policy, &env_cfg, 1).unwrap();
        assert_eq!(e1, e2);
    }

    #[test]
    fn untrained_policy_walks_nowhere_compared_to_baseline() {
        let env_cfg = quick_env();
        let params = WalkerParams::default();
        let baseline = evaluate_controller(
            &env_cfg,
            |s| env::virtual_gravity_control(&params, s, DEFAULT_SLOPE),
            1,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let policy = PolicyParams::init(&mut rng);
        let fresh = evaluate(&policy, &env_cfg, 1).unwrap();
        assert!(fresh.mean_distance < baseline.mean_distance / 2.0);
    }

    #[test]
    fn learning_log_csv_round_trips() {
        let cfg = tiny_train_config(512);
        let outcome = train(&quick_env(), &cfg).unwrap();
        let mut bytes = Vec::new();
        outcome.log.write_episode_csv(&mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        let rows = read_learning_log_csv(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), outcome.log.episodes.len());
        // Re-serialize and compare byte-for-byte.
        let mut again = String::from(LEARNING_LOG_HEADER);
        again.push('\n');
        for r in &rows {
            again.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.step,
                r.episode,
                r.ret,
                r.length,
                r.distance,
                r.policy_loss,
                r.value_loss,
                r.approx_kl,
                r.clip_fraction
            ));
        }
        assert_eq!(text, again);
    }

    #[test]
    fn nonfinite_reward_aborts_with_partial_log() {
        // Poison the value function by constructing a buffer with an
        // infinite advantage; ppo_update must refuse it.
        let (mut policy, mut buffer) = frozen_buffer(64);
        buffer.advantages[0] = f64::INFINITY;
        let cfg = TrainConfig { n_steps: 64, minibatch_size: 64, ..TrainConfig::default() };
        let mut opt = Adam::new(cfg.learning_rate, policy.n_params());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let result = ppo_update(&mut policy, &mut opt, &mut buffer, &cfg, &mut rng);
        assert!(result.is_err());
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { minibatch_size: 100, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { gamma: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { gae_lambda: 1.5, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { clip_eps: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { total_steps: 0, ..ok }.validate().is_err());
    }

    #[test]
    fn gae_bootstrap_values_follow_episode_boundaries() {
        // Sanity on the collection plumbing: next_values of non-terminal
        // steps equal the critic value of the stored successor
        // observation.
        let (_, buffer) = frozen_buffer(64);
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let behavior = PolicyParams::init(&mut rng);
        let mut mismatches = 0;
        for t in 0..buffer.len() - 1 {
            if !buffer.terminated[t] && !buffer.truncated[t] {
                let v = behavior.value(&buffer.observations[t + 1]);
                if (buffer.next_values[t] - v).abs() > 1e-12 {
                    mismatches += 1;
                }
            }
        }
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn random_policy_probe_of_update_stability() {
        // A handful of updates on real rollouts should keep parameters
        // finite and produce sane diagnostics.
        let cfg = TrainConfig {
            total_steps: 1024,
            n_steps: 256,
            minibatch_size: 64,
            epochs_per_update: 4,
            eval_period_updates: 0,
            ..TrainConfig::default()
        };
        let outcome = train(&quick_env(), &cfg).unwrap();
        assert_eq!(outcome.log.updates.len(), 4);
        for u in &outcome.log.updates {
            assert!(u.metrics.policy_loss.is_finite());
            assert!(u.metrics.value_loss.is_finite());
            assert!((0.0..=1.0).contains(&u.metrics.clip_fraction));
        }
        assert!(outcome.policy.to_flat().iter().all(|p| p.is_finite()));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let _ = rng.gen_range(0..10);
    }
}
