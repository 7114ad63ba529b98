//! Rigid-body dynamics of the compass walker.
//!
//! The walker is a double pendulum pinned at the stance foot: a stance leg
//! carrying the hip mass and a swing leg rotating freely about the hip.
//! This module provides the continuous-time dynamics (mass, Coriolis and
//! gravity terms), task-space kinematics of hip and swing foot, the
//! ground-contact predicate and the inelastic impact map that swaps leg
//! roles at heel strike.
//!
//! All operations are pure functions; the walker state is a plain value.
//! Linear solves are explicit 2x2 closed forms with a determinant guard.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 2x2 matrix in row-major order.
pub type Mat2 = [[f64; 2]; 2];
/// 2-vector.
pub type Vec2 = [f64; 2];

/// Errors produced by the mechanics layer.
#[derive(Debug, Error)]
pub enum PlantError {
    #[error("invalid walker parameters: {0}")]
    InvalidParams(String),
    #[error("mass matrix is numerically singular (det = {det:e})")]
    SingularMass { det: f64 },
    #[error("impact transition matrix is numerically singular (det = {det:e})")]
    SingularImpact { det: f64 },
}

/// Physical parameters of the walker.
///
/// Each leg is a massless rod of length `leg_length` with a point mass
/// `leg_mass` located `foot_to_com` from the foot (and therefore
/// `com_to_hip` from the hip); `hip_mass` sits at the hip joint.
/// `leg_length == foot_to_com + com_to_hip` holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerParams {
    /// Point mass at the hip joint (kg).
    pub hip_mass: f64,
    /// Point mass of each leg (kg).
    pub leg_mass: f64,
    /// Distance from the foot to the leg mass point (m).
    pub foot_to_com: f64,
    /// Distance from the leg mass point to the hip (m).
    pub com_to_hip: f64,
    /// Total leg length (m), always `foot_to_com + com_to_hip`.
    pub leg_length: f64,
    /// Gravitational acceleration (m/s^2).
    pub gravity: f64,
}

impl WalkerParams {
    /// Standard Earth gravity used by the default parameter set.
    pub const STANDARD_GRAVITY: f64 = 9.81;

    /// Builds a parameter set, deriving the leg length from the two
    /// segment lengths so that `leg_length = foot_to_com + com_to_hip`
    /// holds exactly.
    pub fn new(
        hip_mass: f64,
        leg_mass: f64,
        foot_to_com: f64,
        com_to_hip: f64,
        gravity: f64,
    ) -> Result<Self, PlantError> {
        let params = Self {
            hip_mass,
            leg_mass,
            foot_to_com,
            com_to_hip,
            leg_length: foot_to_com + com_to_hip,
            gravity,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks positivity of all quantities and the leg-length identity.
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("hip_mass", self.hip_mass),
            ("leg_mass", self.leg_mass),
            ("foot_to_com", self.foot_to_com),
            ("com_to_hip", self.com_to_hip),
            ("gravity", self.gravity),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(PlantError::InvalidParams(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.leg_length != self.foot_to_com + self.com_to_hip {
            return Err(PlantError::InvalidParams(format!(
                "leg_length {} != foot_to_com + com_to_hip {}",
                self.leg_length,
                self.foot_to_com + self.com_to_hip
            )));
        }
        Ok(())
    }
}

impl Default for WalkerParams {
    /// The reference parameter set: hip 1 kg, legs 0.5 kg, segments 0.5 m
    /// each (leg length 1 m), g = 9.81 m/s^2.
    fn default() -> Self {
        Self::new(1.0, 0.5, 0.5, 0.5, Self::STANDARD_GRAVITY).expect("reference parameters")
    }
}

/// Phase-space state of the walker plus stance-foot bookkeeping.
///
/// `theta1` is the stance-leg angle from the upright, `theta2` the
/// swing-leg angle from the upright. `stance_foot_x` is the world x of
/// the pinned stance foot; it changes only at impact events so the hip
/// x position is continuous across steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkerState {
    /// Stance leg angle from upright (rad).
    pub theta1: f64,
    /// Swing leg angle from upright (rad).
    pub theta2: f64,
    /// Stance leg angular velocity (rad/s).
    pub dtheta1: f64,
    /// Swing leg angular velocity (rad/s).
    pub dtheta2: f64,
    /// World x of the pinned stance foot (m).
    pub stance_foot_x: f64,
}

impl WalkerState {
    pub fn new(theta1: f64, theta2: f64, dtheta1: f64, dtheta2: f64) -> Self {
        Self { theta1, theta2, dtheta1, dtheta2, stance_foot_x: 0.0 }
    }

    /// The four phase coordinates [theta1, theta2, dtheta1, dtheta2].
    pub fn phase(&self) -> [f64; 4] {
        [self.theta1, self.theta2, self.dtheta1, self.dtheta2]
    }

    pub fn is_finite(&self) -> bool {
        self.phase().iter().all(|v| v.is_finite()) && self.stance_foot_x.is_finite()
    }
}

/// Task-space pose and velocity of the hip joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HipPose {
    /// Hip x (m).
    pub px: f64,
    /// Hip y (m).
    pub py: f64,
    /// Hip x velocity (m/s).
    pub vx: f64,
    /// Hip y velocity (m/s).
    pub vy: f64,
}

/// Torque inputs: one actuator at the hip, one at the stance ankle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Control {
    /// Hip torque (N m).
    pub hip_torque: f64,
    /// Ankle torque (N m).
    pub ankle_torque: f64,
}

impl Control {
    pub const ZERO: Self = Self { hip_torque: 0.0, ankle_torque: 0.0 };

    pub fn new(hip_torque: f64, ankle_torque: f64) -> Self {
        Self { hip_torque, ankle_torque }
    }

    /// Clamps both torques to [-limit, limit].
    pub fn clamped(&self, limit: f64) -> Self {
        Self {
            hip_torque: self.hip_torque.clamp(-limit, limit),
            ankle_torque: self.ankle_torque.clamp(-limit, limit),
        }
    }
}

/// A heel-strike event: the pre/post states and the inter-leg angle at
/// the moment of transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactEvent {
    /// Inter-leg angle theta1 - theta2 just before the collision (rad).
    pub alpha: f64,
    /// State immediately before the collision.
    pub pre_state: WalkerState,
    /// State immediately after the collision (legs swapped).
    pub post_state: WalkerState,
    /// Episode time of the event (s); filled in by the caller.
    pub time: f64,
}

/// Determinant of a 2x2 matrix.
pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Solves `m x = rhs` by Cramer's rule; `None` if |det| < `guard`.
pub fn solve2(m: &Mat2, rhs: &Vec2, guard: f64) -> Option<Vec2> {
    let det = det2(m);
    if det.abs() < guard {
        return None;
    }
    Some([
        (rhs[0] * m[1][1] - rhs[1] * m[0][1]) / det,
        (m[0][0] * rhs[1] - m[1][0] * rhs[0]) / det,
    ])
}

/// Inertia matrix M(theta).
pub fn mass_matrix(params: &WalkerParams, state: &WalkerState) -> Mat2 {
    let (m_h, m) = (params.hip_mass, params.leg_mass);
    let (a, b, l) = (params.foot_to_com, params.com_to_hip, params.leg_length);
    let coupling = -m * b * l * (state.theta1 - state.theta2).cos();
    [[m_h * l * l + m * a * a + m * l * l, coupling], [coupling, m * b * b]]
}

/// Coriolis matrix C(theta, dtheta); the Coriolis force is `C * dtheta`.
pub fn coriolis_matrix(params: &WalkerParams, state: &WalkerState) -> Mat2 {
    let mbl = params.leg_mass * params.com_to_hip * params.leg_length;
    let s = (state.theta1 - state.theta2).sin();
    [[0.0, -mbl * s * state.dtheta2], [mbl * s * state.dtheta1, 0.0]]
}

/// Gravity torque vector g(theta), the gradient of the potential energy.
pub fn gravity_vector(params: &WalkerParams, state: &WalkerState) -> Vec2 {
    let (m_h, m) = (params.hip_mass, params.leg_mass);
    let (a, b, l, g) = (params.foot_to_com, params.com_to_hip, params.leg_length, params.gravity);
    [
        -g * (m_h * l + m * a + m * l) * state.theta1.sin(),
        g * m * b * state.theta2.sin(),
    ]
}

/// Generalized forces from the torque inputs: `S u` with
/// S = [[1, 1], [0, -1]].
pub fn actuation(u: &Control) -> Vec2 {
    [u.hip_torque + u.ankle_torque, -u.ankle_torque]
}

/// Joint accelerations from `M ddtheta = S u - C dtheta - g`.
pub fn accelerations(
    params: &WalkerParams,
    state: &WalkerState,
    u: &Control,
) -> Result<Vec2, PlantError> {
    let m = mass_matrix(params, state);
    let c = coriolis_matrix(params, state);
    let g = gravity_vector(params, state);
    let su = actuation(u);
    let rhs = [
        su[0] - c[0][0] * state.dtheta1 - c[0][1] * state.dtheta2 - g[0],
        su[1] - c[1][0] * state.dtheta1 - c[1][1] * state.dtheta2 - g[1],
    ];
    solve2(&m, &rhs, 1e-12).ok_or(PlantError::SingularMass { det: det2(&m) })
}

/// Hip position and velocity.
///
/// Convention: hip = stance_foot + leg_length * (-sin theta1, cos theta1),
/// so positive theta1 places the hip behind the stance foot and forward
/// progress during stance corresponds to dtheta1 <= 0.
pub fn hip_pose(params: &WalkerParams, state: &WalkerState) -> HipPose {
    let l = params.leg_length;
    HipPose {
        px: state.stance_foot_x - l * state.theta1.sin(),
        py: l * state.theta1.cos(),
        vx: -l * state.theta1.cos() * state.dtheta1,
        vy: -l * state.theta1.sin() * state.dtheta1,
    }
}

/// Swing-foot position `(x, y)` and vertical velocity `vy`.
///
/// The swing leg hangs from the hip: foot = hip + leg_length *
/// (sin theta2, -cos theta2).
pub fn swing_foot_pose(params: &WalkerParams, state: &WalkerState) -> (f64, f64, f64) {
    let l = params.leg_length;
    let hip = hip_pose(params, state);
    let x = hip.px + l * state.theta2.sin();
    let y = hip.py - l * state.theta2.cos();
    let vy = hip.vy + l * state.theta2.sin() * state.dtheta2;
    (x, y, vy)
}

/// Ground-collision condition for the swing foot: it must be in front of
/// the stance foot by more than `eps_front`, at or below ground level, and
/// descending. The margin suppresses the legs-aligned singularity where
/// both feet coincide at height zero.
pub fn contact_predicate(params: &WalkerParams, state: &WalkerState, eps_front: f64) -> bool {
    let (x, y, vy) = swing_foot_pose(params, state);
    x - state.stance_foot_x > eps_front && y <= 0.0 && vy < 0.0
}

fn impact_matrices(params: &WalkerParams, alpha: f64) -> (Mat2, Mat2) {
    let (m_h, m) = (params.hip_mass, params.leg_mass);
    let (a, b, l) = (params.foot_to_com, params.com_to_hip, params.leg_length);
    let c = alpha.cos();
    let t_post = [
        [m_h * l * l + m * a * a + m * l * (l - b * c), m * b * (b - l * c)],
        [-m * b * l * c, m * b * b],
    ];
    let t_pre = [
        [(m_h * l * l + 2.0 * m * a * l) * c - m * a * b, -m * a * b],
        [-m * a * b, 0.0],
    ];
    (t_post, t_pre)
}

/// Perfectly inelastic heel-strike map.
///
/// Swaps the leg roles (theta1 <-> theta2), transfers angular momentum by
/// solving `T_post(alpha) dtheta_post = T_pre(alpha) dtheta_pre`, and
/// advances the stance foot by the stride length. The caller is
/// responsible for only invoking this where [`contact_predicate`] holds.
pub fn impact_map(params: &WalkerParams, pre: &WalkerState) -> Result<ImpactEvent, PlantError> {
    let alpha = pre.theta1 - pre.theta2;
    let (t_post, t_pre) = impact_matrices(params, alpha);
    let rhs = [
        t_pre[0][0] * pre.dtheta1 + t_pre[0][1] * pre.dtheta2,
        t_pre[1][0] * pre.dtheta1 + t_pre[1][1] * pre.dtheta2,
    ];
    let dtheta_post = solve2(&t_post, &rhs, 1e-10)
        .ok_or(PlantError::SingularImpact { det: det2(&t_post) })?;
    let (swing_x, _, _) = swing_foot_pose(params, pre);
    let post = WalkerState {
        theta1: pre.theta2,
        theta2: pre.theta1,
        dtheta1: dtheta_post[0],
        dtheta2: dtheta_post[1],
        stance_foot_x: swing_x,
    };
    Ok(ImpactEvent { alpha, pre_state: *pre, post_state: post, time: 0.0 })
}

/// Potential energy with the ground as reference level.
pub fn potential_energy(params: &WalkerParams, state: &WalkerState) -> f64 {
    let (m_h, m) = (params.hip_mass, params.leg_mass);
    let (a, b, l, g) = (params.foot_to_com, params.com_to_hip, params.leg_length, params.gravity);
    g * ((m_h * l + m * a + m * l) * state.theta1.cos() - m * b * state.theta2.cos())
}

/// Kinetic energy `0.5 dtheta' M dtheta`.
pub fn kinetic_energy(params: &WalkerParams, state: &WalkerState) -> f64 {
    let m = mass_matrix(params, state);
    let d = [state.dtheta1, state.dtheta2];
    0.5 * (m[0][0] * d[0] * d[0] + 2.0 * m[0][1] * d[0] * d[1] + m[1][1] * d[1] * d[1])
}

/// Total mechanical energy; conserved along unactuated flows between
/// impacts.
pub fn total_energy(params: &WalkerParams, state: &WalkerState) -> f64 {
    kinetic_energy(params, state) + potential_energy(params, state)
}

/// Time derivative of the phase coordinates under held torques.
/// `stance_foot_x` is constant along the continuous flow.
pub fn phase_derivative(
    params: &WalkerParams,
    state: &WalkerState,
    u: &Control,
) -> Result<[f64; 4], PlantError> {
    let acc = accelerations(params, state, u)?;
    Ok([state.dtheta1, state.dtheta2, acc[0], acc[1]])
}

/// One classical Runge-Kutta step of size `h` under zero-order-hold
/// torques.
pub fn rk4_step(
    params: &WalkerParams,
    state: &WalkerState,
    u: &Control,
    h: f64,
) -> Result<WalkerState, PlantError> {
    let add = |s: &WalkerState, k: &[f64; 4], scale: f64| WalkerState {
        theta1: s.theta1 + scale * k[0],
        theta2: s.theta2 + scale * k[1],
        dtheta1: s.dtheta1 + scale * k[2],
        dtheta2: s.dtheta2 + scale * k[3],
        stance_foot_x: s.stance_foot_x,
    };
    let k1 = phase_derivative(params, state, u)?;
    let k2 = phase_derivative(params, &add(state, &k1, 0.5 * h), u)?;
    let k3 = phase_derivative(params, &add(state, &k2, 0.5 * h), u)?;
    let k4 = phase_derivative(params, &add(state, &k3, h), u)?;
    Ok(WalkerState {
        theta1: state.theta1 + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        theta2: state.theta2 + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        dtheta1: state.dtheta1 + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        dtheta2: state.dtheta2 + h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        stance_foot_x: state.stance_foot_x,
    })
}
