//! Compass-gait walking: plant dynamics, the orthant-cycle automaton of
//! ideal walking, a reward library built on it, a PPO trainer and an
//! experiment harness.
//!
//! The crate is organized mirroring the data flow:
//!
//! - [`plant`]: rigid-body dynamics, kinematics, contact and impact map
//! - [`automaton`]: orthant classification and the four-location cycle
//! - [`reward`]: the five reward terms and named weight presets
//! - [`env`]: episodes, event-aware integration, baseline controller
//! - [`rl`]: Gaussian actor-critic networks and PPO training
//! - [`harness`]: CLI-facing experiment orchestration and aggregation

pub mod automaton;
pub mod env;
pub mod harness;
pub mod plant;
pub mod reward;
pub mod rl;
