//! Orthant classification and the four-location walking automaton.
//!
//! The sign pattern of the phase vector (theta1, theta2, dtheta1, dtheta2)
//! partitions the state space into sixteen orthants. Ideal walking visits
//! exactly four of them in a fixed cyclic order; a step of the walker is
//! one traversal of the cycle, closed by the heel-strike reset on the
//! O4 -> O1 edge. Transition classification against this cycle is what the
//! orthant reward consumes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{self, PlantError, WalkerParams, WalkerState};

#[derive(Debug, Error)]
pub enum AutomatonError {
    #[error("({0:?}, {1:?}) is not an edge of the walking cycle")]
    NotAnEdge(Location, Location),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Strict sign pattern of the four phase coordinates; `true` means the
/// coordinate is strictly positive, exact zeros count as non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OrthantPattern {
    pub s1: bool,
    pub s2: bool,
    pub s3: bool,
    pub s4: bool,
}

impl OrthantPattern {
    pub fn new(s1: bool, s2: bool, s3: bool, s4: bool) -> Self {
        Self { s1, s2, s3, s4 }
    }

    /// Orthant index in 1..=16 (binary encoding of the sign bits).
    pub fn index(&self) -> u8 {
        1 + 8 * self.s1 as u8 + 4 * self.s2 as u8 + 2 * self.s3 as u8 + self.s4 as u8
    }
}

/// The four automaton locations of the walking cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Location {
    /// Post-impact: stance behind upright, swing behind the hip and
    /// accelerating forward.
    O1,
    /// Swing leg has passed the hip.
    O2,
    /// Stance leg has passed the upright.
    O3,
    /// Swing leg retracting towards heel strike.
    O4,
}

/// How a sampled state pair relates to the walking cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TransitionKind {
    /// Both states in the same cycle location.
    Stay,
    /// Moved along a cycle edge.
    CycleAdvance,
    /// Entered the cycle from outside.
    Enter,
    /// Left the cycle.
    Exit,
    /// Jumped between cycle locations against the cycle order.
    Backward,
    /// Neither state is in the cycle.
    Outside,
}

/// The transition relation of the cycle, in order.
pub const CYCLE_EDGES: [(Location, Location); 4] = [
    (Location::O1, Location::O2),
    (Location::O2, Location::O3),
    (Location::O3, Location::O4),
    (Location::O4, Location::O1),
];

/// Sign-pattern classification of a state. Boundary values (exact zeros)
/// classify as non-positive.
pub fn classify(state: &WalkerState) -> OrthantPattern {
    OrthantPattern::new(
        state.theta1 > 0.0,
        state.theta2 > 0.0,
        state.dtheta1 > 0.0,
        state.dtheta2 > 0.0,
    )
}

/// The cycle location whose invariant the pattern satisfies, if any.
pub fn location_of(pattern: OrthantPattern) -> Option<Location> {
    match (pattern.s1, pattern.s2, pattern.s3, pattern.s4) {
        (true, false, false, true) => Some(Location::O1),
        (true, true, false, true) => Some(Location::O2),
        (false, true, false, true) => Some(Location::O3),
        (false, true, false, false) => Some(Location::O4),
        _ => None,
    }
}

/// Location of a state, if it lies in the cycle.
pub fn location_of_state(state: &WalkerState) -> Option<Location> {
    location_of(classify(state))
}

/// Classifies the move from `prev` to `cur` against the walking cycle.
/// Remaining in the same location counts as `Stay`, never `Backward`.
pub fn classify_transition(prev: &WalkerState, cur: &WalkerState) -> TransitionKind {
    let from = location_of_state(prev);
    let to = location_of_state(cur);
    match (from, to) {
        (None, None) => TransitionKind::Outside,
        (None, Some(_)) => TransitionKind::Enter,
        (Some(_), None) => TransitionKind::Exit,
        (Some(a), Some(b)) if a == b => TransitionKind::Stay,
        (Some(a), Some(b)) if CYCLE_EDGES.contains(&(a, b)) => TransitionKind::CycleAdvance,
        (Some(_), Some(_)) => TransitionKind::Backward,
    }
}

/// Variable reset applied when traversing a cycle edge: the identity on
/// every edge except O4 -> O1, which is the heel-strike impact map.
pub fn reset_map(
    from: Location,
    to: Location,
    params: &WalkerParams,
    pre: &WalkerState,
) -> Result<WalkerState, AutomatonError> {
    if !CYCLE_EDGES.contains(&(from, to)) {
        return Err(AutomatonError::NotAnEdge(from, to));
    }
    if (from, to) == (Location::O4, Location::O1) {
        Ok(plant::impact_map(params, pre)?.post_state)
    } else {
        Ok(*pre)
    }
}

/// Conformance report of a sampled trajectory against the walking cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleReport {
    /// Index of the first sample inside the cycle, if any.
    pub entered_at: Option<usize>,
    /// Every post-entry transition that is neither `Stay` nor
    /// `CycleAdvance`, with the index of the offending sample.
    pub violations: Vec<(usize, TransitionKind)>,
}

/// Scans a trace for cycle conformance: finds the first sample inside the
/// cycle and records every later transition that breaks the cycle order.
pub fn cycle_monitor(trace: &[WalkerState]) -> CycleReport {
    let entered_at = trace.iter().position(|s| location_of_state(s).is_some());
    let mut violations = Vec::new();
    if let Some(start) = entered_at {
        for i in (start + 1)..trace.len() {
            let kind = classify_transition(&trace[i - 1], &trace[i]);
            if !matches!(kind, TransitionKind::Stay | TransitionKind::CycleAdvance) {
                violations.push((i, kind));
            }
        }
    }
    CycleReport { entered_at, violations }
}
