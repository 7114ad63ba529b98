//! Episode machinery: fixed-step integration with event handling, reward
//! emission, termination, rollouts and the virtual-gravity baseline
//! controller.
//!
//! A control step holds the (clipped) torques for `dt_control` seconds and
//! integrates the smooth dynamics with RK4 substeps. When a substep ends
//! inside the contact set, the heel-strike time is bracketed by bisection,
//! the impact map is applied, and integration continues for the remaining
//! substep time. Rewards are evaluated once per control step on the
//! (previous, current) pair.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton;
use crate::plant::{self, Control, HipPose, ImpactEvent, PlantError, WalkerParams, WalkerState};
use crate::reward::{self, RewardBreakdown, RewardSetup, StepContext};

/// Forward margin of the contact predicate; suppresses spurious impact
/// detection at the legs-aligned singularity.
pub const CONTACT_EPS_FRONT: f64 = 1e-3;

/// Default initial condition shared by all experiments.
pub const INITIAL_PHASE: [f64; 4] = [0.0, 0.0, -0.4, 2.0];

/// Default slope angle emulated by the virtual-gravity controller (rad).
pub const DEFAULT_SLOPE: f64 = -0.07;

const MAX_IMPACTS_PER_STEP: usize = 2;
const IMPACT_BISECTION_ITERS: usize = 100;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
    #[error("step called on a finished episode")]
    EpisodeFinished,
    #[error("more than {MAX_IMPACTS_PER_STEP} impacts within one control period at t = {time}")]
    ExcessiveImpacts { time: f64 },
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Full configuration of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub params: WalkerParams,
    /// Control period (s).
    pub dt_control: f64,
    /// RK4 substeps per control period.
    pub substeps: u32,
    /// Episode horizon (s); must be an integer multiple of `dt_control`.
    pub horizon: f64,
    /// Torque saturation applied to incoming controls (N m).
    pub u_max: f64,
    pub initial_state: WalkerState,
    pub reward_setup: RewardSetup,
    /// Punish holding a cycle location instead of rewarding it.
    pub strict_orthant_reward: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            params: WalkerParams::default(),
            dt_control: 0.01,
            substeps: 4,
            horizon: 10.0,
            u_max: 10.0,
            initial_state: WalkerState::new(
                INITIAL_PHASE[0],
                INITIAL_PHASE[1],
                INITIAL_PHASE[2],
                INITIAL_PHASE[3],
            ),
            reward_setup: RewardSetup::Sparse,
            strict_orthant_reward: false,
        }
    }
}

impl EnvConfig {
    /// Number of control steps in a full episode.
    pub fn horizon_steps(&self) -> u64 {
        (self.horizon / self.dt_control).round() as u64
    }

    fn validate(&self) -> Result<(), EnvError> {
        if !self.dt_control.is_finite() || self.dt_control <= 0.0 {
            return Err(EnvError::InvalidConfig(format!(
                "dt_control must be positive, got {}",
                self.dt_control
            )));
        }
        if self.substeps == 0 {
            return Err(EnvError::InvalidConfig("substeps must be >= 1".into()));
        }
        if !self.horizon.is_finite() || self.horizon <= 0.0 {
            return Err(EnvError::InvalidConfig(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let n = self.horizon_steps();
        if n == 0 || (n as f64 * self.dt_control - self.horizon).abs() > 1e-9 {
            return Err(EnvError::InvalidConfig(format!(
                "horizon {} is not an integer multiple of dt_control {}",
                self.horizon, self.dt_control
            )));
        }
        if !self.u_max.is_finite() || self.u_max <= 0.0 {
            return Err(EnvError::InvalidConfig(format!(
                "u_max must be positive, got {}",
                self.u_max
            )));
        }
        Ok(())
    }
}

/// Extra diagnostics attached to every step result.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub hip: HipPose,
    pub orthant: automaton::OrthantPattern,
    /// Heel strikes handled inside this control step (at most two).
    pub impacts: Vec<ImpactEvent>,
    pub rewards: RewardBreakdown,
}

impl StepInfo {
    pub fn impact(&self) -> bool {
        !self.impacts.is_empty()
    }
}

/// Result of one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    /// The phase coordinates [theta1, theta2, dtheta1, dtheta2].
    pub observation: [f64; 4],
    pub reward: f64,
    /// Episode ended by a fall.
    pub terminated: bool,
    /// Episode ended by reaching the horizon (falls take precedence).
    pub truncated: bool,
    pub info: StepInfo,
}

/// A single walker episode. Deterministic: identical control sequences
/// produce identical trajectories.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    horizon_steps: u64,
    /// Horizon expressed in the same arithmetic as the step clock, so the
    /// distance bonus triggers exactly at the truncating step.
    horizon_time: f64,
    state: WalkerState,
    prev_control: Control,
    steps: u64,
    time: f64,
    finished: bool,
}

impl Env {
    pub fn new(config: EnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        config.params.validate().map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        let horizon_steps = config.horizon_steps();
        let horizon_time = horizon_steps as f64 * config.dt_control;
        let initial = config.initial_state;
        Ok(Self {
            config,
            horizon_steps,
            horizon_time,
            state: initial,
            prev_control: Control::ZERO,
            steps: 0,
            time: 0.0,
            finished: false,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn state(&self) -> &WalkerState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    pub fn hip_pose(&self) -> HipPose {
        plant::hip_pose(&self.config.params, &self.state)
    }

    /// Restores the exact initial condition; no randomization.
    pub fn reset(&mut self) -> [f64; 4] {
        self.state = self.config.initial_state;
        self.prev_control = Control::ZERO;
        self.steps = 0;
        self.time = 0.0;
        self.finished = false;
        self.state.phase()
    }

    /// Advances one control period under the clipped torques.
    pub fn step(&mut self, u_raw: Control) -> Result<StepResult, EnvError> {
        if self.finished {
            return Err(EnvError::EpisodeFinished);
        }
        let u = u_raw.clamped(self.config.u_max);
        let prev_state = self.state;
        let prev_control = self.prev_control;
        let params = self.config.params;
        let h = self.config.dt_control / self.config.substeps as f64;

        let mut impacts: Vec<ImpactEvent> = Vec::new();
        for sub in 0..self.config.substeps {
            let mut remaining = h;
            while remaining > 0.0 {
                let candidate = plant::rk4_step(&params, &self.state, &u, remaining)?;
                if !plant::contact_predicate(&params, &candidate, CONTACT_EPS_FRONT) {
                    self.state = candidate;
                    break;
                }
                let (tau, pre_impact) = locate_impact(&params, &self.state, &u, remaining)?;
                if impacts.len() >= MAX_IMPACTS_PER_STEP {
                    return Err(EnvError::ExcessiveImpacts { time: self.time });
                }
                let mut event = plant::impact_map(&params, &pre_impact)?;
                event.time = self.time + sub as f64 * h + (h - remaining) + tau;
                self.state = event.post_state;
                impacts.push(event);
                remaining -= tau;
            }
        }

        self.steps += 1;
        self.time = self.steps as f64 * self.config.dt_control;

        let hip = plant::hip_pose(&params, &self.state);
        let prev_hip = plant::hip_pose(&params, &prev_state);
        let ctx = StepContext {
            state: self.state,
            prev_state,
            hip,
            prev_hip,
            control: u,
            prev_control,
            time: self.time,
            horizon: self.horizon_time,
        };
        let rewards = reward::composite(
            &ctx,
            &self.config.reward_setup.weights(),
            self.config.strict_orthant_reward,
        );

        let terminated = rewards.fall == 1.0;
        let truncated = !terminated && self.steps >= self.horizon_steps;
        self.finished = terminated || truncated;
        self.prev_control = u;

        Ok(StepResult {
            observation: self.state.phase(),
            reward: rewards.total,
            terminated,
            truncated,
            info: StepInfo { hip, orthant: automaton::classify(&self.state), impacts, rewards },
        })
    }
}

/// Brackets the earliest time in `(0, h]` at which the contact predicate
/// switches on, by bisection on the integration time. The returned state
/// satisfies the predicate; for touchdown events its swing-foot height is
/// resolved far below the 1e-8 tolerance.
fn locate_impact(
    params: &WalkerParams,
    start: &WalkerState,
    u: &Control,
    h: f64,
) -> Result<(f64, WalkerState), PlantError> {
    let mut lo = 0.0f64;
    let mut hi = h;
    let mut hi_state = plant::rk4_step(params, start, u, h)?;
    for _ in 0..IMPACT_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let mid_state = plant::rk4_step(params, start, u, mid)?;
        if plant::contact_predicate(params, &mid_state, CONTACT_EPS_FRONT) {
            hi = mid;
            hi_state = mid_state;
        } else {
            lo = mid;
        }
    }
    Ok((hi, hi_state))
}

/// Torques emulating gravity on a slope of angle `phi` while walking on
/// flat ground: solves `S u = rhs(theta) * g tan(phi)` for u.
pub fn virtual_gravity_control(params: &WalkerParams, state: &WalkerState, phi: f64) -> Control {
    let (m_h, m) = (params.hip_mass, params.leg_mass);
    let (a, b, l) = (params.foot_to_com, params.com_to_hip, params.leg_length);
    let scale = params.gravity * phi.tan();
    let rhs = [
        (m_h * l + m * (a + l)) * state.theta1.cos() * scale,
        -(m * b) * state.theta2.cos() * scale,
    ];
    let ankle = -rhs[1];
    Control::new(rhs[0] - ankle, ankle)
}

/// One recorded control step (the first sample is the initial state with
/// zero controls and rewards).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub time: f64,
    pub state: WalkerState,
    pub control: Control,
    pub hip: HipPose,
    pub orthant_index: u8,
    pub rewards: RewardBreakdown,
    pub impact: bool,
}

/// Full record of an episode rollout.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeTrace {
    pub samples: Vec<TraceSample>,
    pub impact_events: Vec<ImpactEvent>,
    pub terminated: bool,
    pub truncated: bool,
}

impl EpisodeTrace {
    /// Final hip x position (m); the initial hip is at x = 0 for the
    /// default initial condition.
    pub fn distance(&self) -> f64 {
        self.samples.last().map(|s| s.hip.px).unwrap_or(0.0)
    }

    /// Sum of composite rewards over the episode.
    pub fn total_reward(&self) -> f64 {
        self.samples.iter().map(|s| s.rewards.total).sum()
    }

    /// Number of heel strikes.
    pub fn impact_count(&self) -> usize {
        self.impact_events.len()
    }

    pub fn states(&self) -> Vec<WalkerState> {
        self.samples.iter().map(|s| s.state).collect()
    }

    /// Writes the trace in the stable CSV schema (one row per control
    /// step, full float precision).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", TRACE_CSV_HEADER)?;
        for s in &self.samples {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                s.time,
                s.state.theta1,
                s.state.theta2,
                s.state.dtheta1,
                s.state.dtheta2,
                s.control.hip_torque,
                s.control.ankle_torque,
                s.hip.px,
                s.hip.py,
                s.orthant_index,
                s.rewards.jerk,
                s.rewards.dist,
                s.rewards.fall,
                s.rewards.forward,
                s.rewards.orthant,
                s.rewards.total,
                s.impact as u8,
            )?;
        }
        Ok(())
    }
}

pub const TRACE_CSV_HEADER: &str =
    "t,theta1,theta2,dtheta1,dtheta2,u1,u2,px,py,orthant_k,r_jerk,r_dist,r_fall,r_for,r_or,reward,impact";

/// One parsed row of the trace CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub dtheta1: f64,
    pub dtheta2: f64,
    pub u1: f64,
    pub u2: f64,
    pub px: f64,
    pub py: f64,
    pub orthant_k: u8,
    pub r_jerk: f64,
    pub r_dist: f64,
    pub r_fall: f64,
    pub r_for: f64,
    pub r_or: f64,
    pub reward: f64,
    pub impact: bool,
}

impl TraceRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.theta1,
            self.theta2,
            self.dtheta1,
            self.dtheta2,
            self.u1,
            self.u2,
            self.px,
            self.py,
            self.orthant_k,
            self.r_jerk,
            self.r_dist,
            self.r_fall,
            self.r_for,
            self.r_or,
            self.reward,
            self.impact as u8,
        )
    }
}

/// Parses a trace CSV produced by [`EpisodeTrace::write_csv`].
pub fn read_trace_csv<R: BufRead>(r: R) -> std::io::Result<Vec<TraceRow>> {
    let bad = |msg: String| std::io::Error::new(std::io::ErrorKind::InvalidData, msg);
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != TRACE_CSV_HEADER {
                return Err(bad(format!("unexpected trace header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 17 {
            return Err(bad(format!("expected 17 fields, got {} in line {i}", fields.len())));
        }
        let f = |j: usize| -> std::io::Result<f64> {
            fields[j].parse().map_err(|e| bad(format!("field {j} line {i}: {e}")))
        };
        rows.push(TraceRow {
            t: f(0)?,
            theta1: f(1)?,
            theta2: f(2)?,
            dtheta1: f(3)?,
            dtheta2: f(4)?,
            u1: f(5)?,
            u2: f(6)?,
            px: f(7)?,
            py: f(8)?,
            orthant_k: fields[9].parse().map_err(|e| bad(format!("orthant_k line {i}: {e}")))?,
            r_jerk: f(10)?,
            r_dist: f(11)?,
            r_fall: f(12)?,
            r_for: f(13)?,
            r_or: f(14)?,
            reward: f(15)?,
            impact: fields[16] == "1",
        });
    }
    Ok(rows)
}

/// Runs `reset` then `step` with the given controller until the episode
/// finishes or `max_time` is reached, recording the full trace.
pub fn rollout<F>(config: &EnvConfig, mut controller: F, max_time: f64) -> Result<EpisodeTrace, EnvError>
where
    F: FnMut(&WalkerState) -> Control,
{
    let mut env = Env::new(config.clone())?;
    env.reset();
    let params = config.params;
    let initial = *env.state();
    let mut trace = EpisodeTrace {
        samples: vec![TraceSample {
            time: 0.0,
            state: initial,
            control: Control::ZERO,
            hip: plant::hip_pose(&params, &initial),
            orthant_index: automaton::classify(&initial).index(),
            rewards: RewardBreakdown { jerk: 0.0, dist: 0.0, fall: 0.0, forward: 0.0, orthant: 0.0, total: 0.0 },
            impact: false,
        }],
        ..Default::default()
    };
    while !env.finished() && env.time() < max_time {
        let u = controller(env.state());
        let result = env.step(u)?;
        let applied = u.clamped(config.u_max);
        trace.samples.push(TraceSample {
            time: env.time(),
            state: *env.state(),
            control: applied,
            hip: result.info.hip,
            orthant_index: result.info.orthant.index(),
            rewards: result.info.rewards,
            impact: result.info.impact(),
        });
        trace.impact_events.extend(result.info.impacts.iter().copied());
        trace.terminated = result.terminated;
        trace.truncated = result.truncated;
    }
    Ok(trace)
}
