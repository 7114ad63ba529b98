//! Reward terms for learned walking and their weighted composite.
//!
//! Five terms: a +/-1 orthant-cycle term, a +/-1 forward-motion term, a
//! control-smoothness magnitude, a one-shot walking-distance bonus at the
//! episode horizon, and a fall indicator. The composite is their weighted
//! sum; the named setups differ only in the forward/orthant weights.

use serde::{Deserialize, Serialize};

use crate::automaton::{classify_transition, TransitionKind};
use crate::plant::{Control, HipPose, WalkerState};

/// Coefficients of the composite reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub jerk: f64,
    pub dist: f64,
    pub fall: f64,
    pub forward: f64,
    pub orthant: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { jerk: -0.001, dist: 1.0, fall: -10.0, forward: 0.0, orthant: 0.0 }
    }
}

/// Named shaping-weight presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RewardSetup {
    /// No shaping terms.
    Sparse,
    /// Forward-motion shaping only.
    Forward,
    /// Orthant-cycle shaping only.
    Orthant,
    /// Both shaping terms at half weight.
    ForwardPlusOrthant,
}

impl RewardSetup {
    pub const ALL: [RewardSetup; 4] = [
        RewardSetup::Sparse,
        RewardSetup::Forward,
        RewardSetup::Orthant,
        RewardSetup::ForwardPlusOrthant,
    ];

    /// Stable CLI-facing identifier.
    pub fn name(&self) -> &'static str {
        match self {
            RewardSetup::Sparse => "sparse",
            RewardSetup::Forward => "for",
            RewardSetup::Orthant => "or",
            RewardSetup::ForwardPlusOrthant => "for_plus_or",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// The weight table for this setup.
    pub fn weights(&self) -> RewardWeights {
        let (forward, orthant) = match self {
            RewardSetup::Sparse => (0.0, 0.0),
            RewardSetup::Forward => (0.01, 0.0),
            RewardSetup::Orthant => (0.0, 0.01),
            RewardSetup::ForwardPlusOrthant => (0.005, 0.005),
        };
        RewardWeights { forward, orthant, ..RewardWeights::default() }
    }
}

impl std::fmt::Display for RewardSetup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Error for unrecognized setup names.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown reward setup '{0}' (expected sparse|for|or|for_plus_or)")]
pub struct ParseSetupError(String);

impl std::str::FromStr for RewardSetup {
    type Err = ParseSetupError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_name(s).ok_or_else(|| ParseSetupError(s.to_string()))
    }
}

/// Everything the composite reward looks at for one control step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    pub state: WalkerState,
    pub prev_state: WalkerState,
    pub hip: HipPose,
    pub prev_hip: HipPose,
    pub control: Control,
    pub prev_control: Control,
    /// Episode time after the step (s).
    pub time: f64,
    /// Episode horizon (s).
    pub horizon: f64,
}

/// Orthant-cycle reward: +1 for advancing along the cycle, entering it,
/// or (by default) holding a cycle location; -1 otherwise. In strict mode
/// holding a location is also punished, keeping only the two literal +1
/// cases of cycle-edge moves and cycle entries.
pub fn orthant_reward(state: &WalkerState, prev_state: &WalkerState, strict: bool) -> f64 {
    match classify_transition(prev_state, state) {
        TransitionKind::CycleAdvance | TransitionKind::Enter => 1.0,
        TransitionKind::Stay if !strict => 1.0,
        _ => -1.0,
    }
}

/// Forward reward: +1 for strictly positive hip displacement, -1 for
/// standing still or moving backward.
pub fn forward_reward(hip: &HipPose, prev_hip: &HipPose) -> f64 {
    if hip.px - prev_hip.px > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Control-smoothness magnitude: Euclidean norm of the torque change.
/// Weighted negatively in the composite.
pub fn jerk_magnitude(control: &Control, prev_control: &Control) -> f64 {
    let dh = control.hip_torque - prev_control.hip_torque;
    let da = control.ankle_torque - prev_control.ankle_torque;
    (dh * dh + da * da).sqrt()
}

/// Walking-distance bonus: the hip x position, granted once the episode
/// time reaches the horizon (inclusive), zero before.
pub fn distance_reward(hip: &HipPose, time: f64, horizon: f64) -> f64 {
    if time >= horizon {
        hip.px
    } else {
        0.0
    }
}

/// Fall indicator: 1 when the hip is at or below ground level.
pub fn fall_indicator(hip: &HipPose) -> f64 {
    if hip.py <= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Per-term values of one composite evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub jerk: f64,
    pub dist: f64,
    pub fall: f64,
    pub forward: f64,
    pub orthant: f64,
    /// The weighted sum of the five terms.
    pub total: f64,
}

/// Evaluates all five terms and their weighted sum.
pub fn composite(ctx: &StepContext, weights: &RewardWeights, strict_orthant: bool) -> RewardBreakdown {
    let jerk = jerk_magnitude(&ctx.control, &ctx.prev_control);
    let dist = distance_reward(&ctx.hip, ctx.time, ctx.horizon);
    let fall = fall_indicator(&ctx.hip);
    let forward = forward_reward(&ctx.hip, &ctx.prev_hip);
    let orthant = orthant_reward(&ctx.state, &ctx.prev_state, strict_orthant);
    let total = weights.jerk * jerk
        + weights.dist * dist
        + weights.fall * fall
        + weights.forward * forward
        + weights.orthant * orthant;
    RewardBreakdown { jerk, dist, fall, forward, orthant, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::automaton::{location_of_state, Location, CYCLE_EDGES};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(phase: [f64; 4]) -> WalkerState {
        WalkerState::new(phase[0], phase[1], phase[2], phase[3])
    }

    fn hip(px: f64, py: f64) -> HipPose {
        HipPose { px, py, vx: 0.0, vy: 0.0 }
    }

    fn in_location(loc: Location) -> WalkerState {
        match loc {
            Location::O1 => state([0.2, -0.2, -0.5, 1.0]),
            Location::O2 => state([0.2, 0.2, -0.5, 1.0]),
            Location::O3 => state([-0.2, 0.2, -0.5, 1.0]),
            Location::O4 => state([-0.2, 0.2, -0.5, -1.0]),
        }
    }

    #[test]
    fn setup_weight_table() {
        assert_eq!(RewardSetup::Sparse.weights().forward, 0.0);
        assert_eq!(RewardSetup::Sparse.weights().orthant, 0.0);
        assert_eq!(RewardSetup::Forward.weights().forward, 0.01);
        assert_eq!(RewardSetup::Forward.weights().orthant, 0.0);
        assert_eq!(RewardSetup::Orthant.weights().forward, 0.0);
        assert_eq!(RewardSetup::Orthant.weights().orthant, 0.01);
        assert_eq!(RewardSetup::ForwardPlusOrthant.weights().forward, 0.005);
        assert_eq!(RewardSetup::ForwardPlusOrthant.weights().orthant, 0.005);
        for setup in RewardSetup::ALL {
            let w = setup.weights();
            assert_eq!(w.jerk, -0.001);
            assert_eq!(w.dist, 1.0);
            assert_eq!(w.fall, -10.0);
            assert_eq!(RewardSetup::from_name(setup.name()), Some(setup));
        }
    }

    #[test]
    fn orthant_reward_cases() {
        let outside = state([0.0, 0.0, -0.4, 2.0]);
        assert_eq!(orthant_reward(&in_location(Location::O2), &in_location(Location::O1), false), 1.0);
        assert_eq!(orthant_reward(&in_location(Location::O3), &outside, false), 1.0);
        assert_eq!(orthant_reward(&outside, &in_location(Location::O3), false), -1.0);
        assert_eq!(orthant_reward(&in_location(Location::O1), &in_location(Location::O2), false), -1.0);
        assert_eq!(orthant_reward(&outside, &outside, false), -1.0);
    }

    #[test]
    fn orthant_reward_strict_mode_punishes_stay() {
        let s = in_location(Location::O2);
        assert_eq!(orthant_reward(&s, &s, false), 1.0);
        assert_eq!(orthant_reward(&s, &s, true), -1.0);
        // The other cases agree between the modes.
        assert_eq!(orthant_reward(&in_location(Location::O2), &in_location(Location::O1), true), 1.0);
        let outside = state([0.0, 0.0, -0.4, 2.0]);
        assert_eq!(orthant_reward(&in_location(Location::O1), &outside, true), 1.0);
        assert_eq!(orthant_reward(&outside, &in_location(Location::O1), true), -1.0);
    }

    #[test]
    fn orthant_reward_matches_brute_force_over_all_pair_classes() {
        // Oracle that re-evaluates the invariants and edge membership
        // directly from the definition.
        let oracle = |prev: &WalkerState, cur: &WalkerState, strict: bool| -> f64 {
            let from = location_of_state(prev);
            let to = location_of_state(cur);
            match (from, to) {
                (Some(a), Some(b)) if CYCLE_EDGES.contains(&(a, b)) => 1.0,
                (None, Some(_)) => 1.0,
                (Some(a), Some(b)) if a == b && !strict => 1.0,
                _ => -1.0,
            }
        };
        // One representative per orthant: enumerate all sign patterns.
        let reps: Vec<WalkerState> = (0..16)
            .map(|bits: i32| {
                let sign = |b: bool| if b { 0.3 } else { -0.3 };
                state([
                    sign(bits & 8 != 0),
                    sign(bits & 4 != 0),
                    sign(bits & 2 != 0),
                    sign(bits & 1 != 0),
                ])
            })
            .collect();
        for prev in &reps {
            for cur in &reps {
                for strict in [false, true] {
                    assert_eq!(
                        orthant_reward(cur, prev, strict),
                        oracle(prev, cur, strict),
                        "prev {:?} cur {:?} strict {strict}",
                        prev.phase(),
                        cur.phase()
                    );
                }
            }
        }
    }

    #[test]
    fn orthant_reward_depends_only_on_sign_pattern() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let base = state([
                rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
                rng.gen_range(0.1..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            ]);
            // Scale each coordinate without crossing zero.
            let scale = rng.gen_range(0.5..1.5);
            let perturbed = state([
                base.theta1 * scale,
                base.theta2 * scale,
                base.dtheta1 * scale,
                base.dtheta2 * scale,
            ]);
            let prev = in_location(Location::O1);
            assert_eq!(
                orthant_reward(&base, &prev, false),
                orthant_reward(&perturbed, &prev, false)
            );
        }
    }

    #[test]
    fn forward_reward_cases() {
        assert_eq!(forward_reward(&hip(0.51, 1.0), &hip(0.50, 1.0)), 1.0);
        assert_eq!(forward_reward(&hip(0.5, 1.0), &hip(0.5, 1.0)), -1.0);
        assert_eq!(forward_reward(&hip(0.4, 1.0), &hip(0.5, 1.0)), -1.0);
    }

    #[test]
    fn jerk_magnitude_cases() {
        let u = Control::new(0.7, -0.3);
        assert_eq!(jerk_magnitude(&u, &u), 0.0);
        assert_eq!(jerk_magnitude(&Control::new(1.0, 0.0), &Control::ZERO), 1.0);
        assert_eq!(jerk_magnitude(&Control::new(3.0, 4.0), &Control::ZERO), 5.0);
    }

    #[test]
    fn distance_reward_cases() {
        assert_eq!(distance_reward(&hip(4.2, 1.0), 9.99, 10.0), 0.0);
        assert_eq!(distance_reward(&hip(4.2, 1.0), 10.0, 10.0), 4.2);
        assert_eq!(distance_reward(&hip(4.2, 1.0), 10.01, 10.0), 4.2);
    }

    #[test]
    fn fall_indicator_cases() {
        assert_eq!(fall_indicator(&hip(0.0, 0.9)), 0.0);
        assert_eq!(fall_indicator(&hip(0.0, 0.0)), 1.0);
        assert_eq!(fall_indicator(&hip(0.0, -0.1)), 1.0);
    }

    fn mid_episode_ctx() -> StepContext {
        StepContext {
            state: in_location(Location::O2),
            prev_state: in_location(Location::O1),
            hip: hip(0.51, 0.95),
            prev_hip: hip(0.50, 0.96),
            control: Control::new(0.2, -0.1),
            prev_control: Control::new(0.2, -0.1),
            time: 3.0,
            horizon: 10.0,
        }
    }

    #[test]
    fn composite_reference_values() {
        let ctx = mid_episode_ctx();
        let zero = RewardWeights { jerk: 0.0, dist: 0.0, fall: 0.0, forward: 0.0, orthant: 0.0 };
        assert_eq!(composite(&ctx, &zero, false).total, 0.0);

        // Sparse setup mid-episode with smooth controls and no fall.
        let sparse = composite(&ctx, &RewardSetup::Sparse.weights(), false);
        assert_eq!(sparse.total, 0.0);

        // Cycle advance with forward motion under the combined setup.
        let combined = composite(&ctx, &RewardSetup::ForwardPlusOrthant.weights(), false);
        assert!((combined.total - 0.01).abs() < 1e-15);
    }

    #[test]
    fn composite_is_linear_in_weights() {
        let ctx = mid_episode_ctx();
        let w = RewardWeights { jerk: -0.002, dist: 0.5, fall: -3.0, forward: 0.01, orthant: 0.02 };
        for lambda in [0.0, 0.5, 2.0, -1.0] {
            let scaled = RewardWeights {
                jerk: lambda * w.jerk,
                dist: lambda * w.dist,
                fall: lambda * w.fall,
                forward: lambda * w.forward,
                orthant: lambda * w.orthant,
            };
            let lhs = composite(&ctx, &scaled, false).total;
            let rhs = lambda * composite(&ctx, &w, false).total;
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn term_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = state([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ]);
            let b = state([
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-3.0..3.0),
            ]);
            let h1 = hip(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let h2 = hip(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let u1 = Control::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let u2 = Control::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            for strict in [false, true] {
                let r = orthant_reward(&a, &b, strict);
                assert!(r == 1.0 || r == -1.0);
            }
            let f = forward_reward(&h1, &h2);
            assert!(f == 1.0 || f == -1.0);
            let fall = fall_indicator(&h1);
            assert!(fall == 0.0 || fall == 1.0);
            assert!(jerk_magnitude(&u1, &u2) >= 0.0);
        }
    }
}
