//! The four benchmark plants as parameterized vector fields.
//!
//! Each plant exposes its right-hand side, actuator saturation, a
//! finite-difference linearization about the upright/zero equilibrium and
//! the metadata the agents see in their prompts (state names, regulated
//! output, the order in which full-state feedback gains apply).

use alloc::format;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use libm::{cos, sin};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error};

/// Largest state dimension among the supported plants.
pub const MAX_DIM: usize = 4;

/// Divergence bound: any state component beyond this magnitude ends an episode.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// A fixed-capacity state vector, `Copy` so the integrator never allocates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlantState {
    dim: usize,
    x: [f64; MAX_DIM],
}

impl PlantState {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "state dimension {dim} out of range");
        PlantState { dim, x: [0.0; MAX_DIM] }
    }

    pub fn from_slice(values: &[f64]) -> Self {
        let mut s = PlantState::zeros(values.len());
        s.x[..values.len()].copy_from_slice(values);
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x[..self.dim]
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.x[..self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|v| v.is_finite())
    }

    /// `self + h * other`, component-wise.
    pub fn add_scaled(&self, other: &PlantState, h: f64) -> PlantState {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = *self;
        for i in 0..self.dim {
            out.x[i] += h * other.x[i];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<usize> for PlantState {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.as_slice()[i]
    }
}

impl IndexMut<usize> for PlantState {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.as_mut_slice()[i]
    }
}

impl Serialize for PlantState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PlantState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<f64> = Vec::deserialize(d)?;
        if v.is_empty() || v.len() > MAX_DIM {
            return Err(serde::de::Error::custom("state dimension must be 1..=4"));
        }
        Ok(PlantState::from_slice(&v))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantId {
    DcMotor,
    BallBeam,
    Pendulum,
    DoublePendulum,
}

impl PlantId {
    pub const ALL: [PlantId; 4] = [PlantId::DcMotor, PlantId::BallBeam, PlantId::Pendulum, PlantId::DoublePendulum];

    pub fn as_str(self) -> &'static str {
        match self {
            PlantId::DcMotor => "dc_motor",
            PlantId::BallBeam => "ball_beam",
            PlantId::Pendulum => "pendulum",
            PlantId::DoublePendulum => "double_pendulum",
        }
    }
}

impl core::str::FromStr for PlantId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        PlantId::ALL.into_iter().find(|p| p.as_str() == s).ok_or_else(|| config(format!("unknown plant '{s}'")))
    }
}

impl core::fmt::Display for PlantId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Armature-controlled DC motor; state (i, ω, θ), input voltage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DcMotorParams {
    pub motor_constant: f64,
    pub resistance: f64,
    pub inductance: f64,
    pub inertia: f64,
    pub damping: f64,
    pub voltage_limit: f64,
}

impl Default for DcMotorParams {
    fn default() -> Self {
        DcMotorParams {
            motor_constant: 0.01,
            resistance: 1.0,
            inductance: 0.5,
            inertia: 0.01,
            damping: 0.1,
            voltage_limit: 24.0,
        }
    }
}

/// Ball rolling on a beam; state (r, ṙ, α, α̇), input beam angular acceleration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallBeamParams {
    pub gravity: f64,
    pub ball_radius: f64,
    pub ball_mass: f64,
    pub ball_inertia: f64,
    pub damping: f64,
    pub input_limit: f64,
}

impl Default for BallBeamParams {
    fn default() -> Self {
        BallBeamParams {
            gravity: 9.81,
            ball_radius: 0.015,
            ball_mass: 0.11,
            ball_inertia: 1e-5,
            damping: 0.1,
            input_limit: 5.0,
        }
    }
}

/// Torque-driven pendulum; state (θ, θ̇) with θ measured from upright.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub damping: f64,
    pub torque_limit: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams { mass: 0.1, length: 0.5, gravity: 9.81, damping: 0.1, torque_limit: 1.0 }
    }
}

/// Point-mass double pendulum, upright, absolute angles; state (θ1, θ̇1, θ2, θ̇2).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoublePendulumParams {
    pub mass1: f64,
    pub mass2: f64,
    pub length1: f64,
    pub length2: f64,
    pub gravity: f64,
    pub input_limit: f64,
}

impl Default for DoublePendulumParams {
    fn default() -> Self {
        DoublePendulumParams { mass1: 0.1, mass2: 0.05, length1: 0.5, length2: 0.3, gravity: 9.81, input_limit: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plant", content = "params", rename_all = "snake_case")]
pub enum PlantModel {
    DcMotor(DcMotorParams),
    BallBeam(BallBeamParams),
    Pendulum(PendulumParams),
    DoublePendulum(DoublePendulumParams),
}

/// Display metadata shown to agents.
#[derive(Clone, Copy, Debug)]
pub struct PlantInfo {
    pub title: &'static str,
    pub phrase: &'static str,
    pub description: &'static str,
    pub state_labels: &'static str,
    pub input_label: &'static str,
}

impl PlantModel {
    pub fn nominal(id: PlantId) -> PlantModel {
        match id {
            PlantId::DcMotor => PlantModel::DcMotor(DcMotorParams::default()),
            PlantId::BallBeam => PlantModel::BallBeam(BallBeamParams::default()),
            PlantId::Pendulum => PlantModel::Pendulum(PendulumParams::default()),
            PlantId::DoublePendulum => PlantModel::DoublePendulum(DoublePendulumParams::default()),
        }
    }

    pub fn id(&self) -> PlantId {
        match self {
            PlantModel::DcMotor(_) => PlantId::DcMotor,
            PlantModel::BallBeam(_) => PlantId::BallBeam,
            PlantModel::Pendulum(_) => PlantId::Pendulum,
            PlantModel::DoublePendulum(_) => PlantId::DoublePendulum,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            PlantModel::DcMotor(_) => 3,
            PlantModel::Pendulum(_) => 2,
            PlantModel::BallBeam(_) | PlantModel::DoublePendulum(_) => 4,
        }
    }

    pub fn input_limit(&self) -> f64 {
        match self {
            PlantModel::DcMotor(p) => p.voltage_limit,
            PlantModel::BallBeam(p) => p.input_limit,
            PlantModel::Pendulum(p) => p.torque_limit,
            PlantModel::DoublePendulum(p) => p.input_limit,
        }
    }

    /// Index of the regulated output within the state vector.
    pub fn regulated_index(&self) -> usize {
        match self {
            PlantModel::DcMotor(_) => 2,
            _ => 0,
        }
    }

    /// State indices that full-state feedback gains K1..Kn act on, in gain order.
    ///
    /// The double pendulum feeds back positions first, then rates.
    pub fn feedback_indices(&self) -> &'static [usize] {
        match self {
            PlantModel::DcMotor(_) => &[0, 1, 2],
            PlantModel::BallBeam(_) => &[0, 1, 2, 3],
            PlantModel::Pendulum(_) => &[0, 1],
            PlantModel::DoublePendulum(_) => &[0, 2, 1, 3],
        }
    }

    /// Short state names in state-vector order.
    pub fn state_names(&self) -> &'static [&'static str] {
        match self {
            PlantModel::DcMotor(_) => &["current", "omega", "theta"],
            PlantModel::BallBeam(_) => &["r", "dr", "alpha", "dalpha"],
            PlantModel::Pendulum(_) => &["theta", "dtheta"],
            PlantModel::DoublePendulum(_) => &["theta1", "dtheta1", "theta2", "dtheta2"],
        }
    }

    pub fn info(&self) -> PlantInfo {
        match self {
            PlantModel::DcMotor(_) => PlantInfo {
                title: "DC Motor Position Control",
                phrase: "DC motor position control system",
                description: "A DC motor position control system with current, angular velocity, and position states. The goal is to control the motor's angular position by applying voltage. The system includes electrical and mechanical dynamics with active control.",
                state_labels: "current, omega, theta",
                input_label: "voltage",
            },
            PlantModel::BallBeam(_) => PlantInfo {
                title: "Ball and Beam System",
                phrase: "ball and beam system",
                description: "A ball rolling on a beam where the control input is the angular acceleration of the beam. The goal is to stabilize the ball at a desired position along the beam.",
                state_labels: "ball_position (r), ball_velocity (dr), beam_angle (alpha), beam_angular_velocity (dalpha)",
                input_label: "beam_angular_acceleration (theta)",
            },
            PlantModel::Pendulum(_) => PlantInfo {
                title: "Inverted Pendulum",
                phrase: "inverted pendulum system",
                description: "A torque-actuated pendulum that must be swung to and balanced at the upright position. The torque is limited, so large initial angles require pumping energy before balancing.",
                state_labels: "angle (theta), angular_velocity (dtheta)",
                input_label: "torque (tau)",
            },
            PlantModel::DoublePendulum(_) => PlantInfo {
                title: "Double Inverted Pendulum",
                phrase: "double inverted pendulum system",
                description: "Two serially linked pendulums balanced upright by a single torque acting on the first link. The goal is to return both links to the upright position.",
                state_labels: "theta1, dtheta1, theta2, dtheta2",
                input_label: "torque (u)",
            },
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let (name, vals): (&str, Vec<f64>) = match self {
            PlantModel::DcMotor(p) => (
                "dc_motor",
                alloc::vec![p.motor_constant, p.resistance, p.inductance, p.inertia, p.damping, p.voltage_limit],
            ),
            PlantModel::BallBeam(p) => (
                "ball_beam",
                alloc::vec![p.gravity, p.ball_radius, p.ball_mass, p.ball_inertia, p.damping, p.input_limit],
            ),
            PlantModel::Pendulum(p) => {
                ("pendulum", alloc::vec![p.mass, p.length, p.gravity, p.damping, p.torque_limit])
            }
            PlantModel::DoublePendulum(p) => {
                ("double_pendulum", alloc::vec![p.mass1, p.mass2, p.length1, p.length2, p.gravity, p.input_limit])
            }
        };
        if vals.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(config(format!("{name} parameters must be finite and strictly positive")))
        }
    }

    /// Right-hand side at `(x, u)`. Non-finite values propagate instead of erroring,
    /// which is what the integrator wants when it probes a diverging trajectory.
    pub fn vector_field(&self, x: &PlantState, u: f64) -> PlantState {
        let mut dx = PlantState::zeros(self.dim());
        match self {
            PlantModel::DcMotor(p) => {
                let (i, w) = (x[0], x[1]);
                dx[0] = (u - p.resistance * i - p.motor_constant * w) / p.inductance;
                dx[1] = (p.motor_constant * i - p.damping * w) / p.inertia;
                dx[2] = w;
            }
            PlantModel::BallBeam(p) => {
                let (r, dr, a, da) = (x[0], x[1], x[2], x[3]);
                let mr2 = p.ball_mass * p.ball_radius * p.ball_radius;
                dx[0] = dr;
                dx[1] = mr2 * (r * da * da + p.gravity * sin(a)) / (mr2 + p.ball_inertia);
                dx[2] = da;
                dx[3] = u;
            }
            PlantModel::Pendulum(p) => {
                let (th, w) = (x[0], x[1]);
                dx[0] = w;
                dx[1] = (u + p.length * p.gravity * p.mass * sin(th) - p.damping * w) / (p.length * p.length * p.mass);
            }
            PlantModel::DoublePendulum(p) => {
                let (t1, w1, t2, w2) = (x[0], x[1], x[2], x[3]);
                let (m1, m2, l1, l2, g) = (p.mass1, p.mass2, p.length1, p.length2, p.gravity);
                let d = t1 - t2;
                let c = 2.0 * m1 + m2 - m2 * cos(2.0 * d);
                dx[0] = w1;
                dx[1] = (l1 * g * (2.0 * m1 + m2) * sin(t1) + l1 * g * m2 * sin(t1 - 2.0 * t2)
                    - l1 * l1 * w1 * w1 * m2 * sin(2.0 * d)
                    - 2.0 * l1 * l2 * w2 * w2 * m2 * sin(d)
                    - 2.0 * u)
                    / (l1 * l1 * c);
                dx[2] = w2;
                dx[3] = (2.0 * l1 * l1 * w1 * w1 * (m1 + m2) * sin(d)
                    + l1 * l2 * w2 * w2 * m2 * sin(2.0 * d)
                    + l1 * g * (m1 + m2) * sin(t2)
                    - l1 * g * (m1 + m2) * sin(2.0 * t1 - t2)
                    + 2.0 * u * cos(d))
                    / (l1 * l2 * c);
            }
        }
        dx
    }

    /// Checked right-hand side: rejects wrong dimensions and non-finite inputs.
    pub fn derivative(&self, x: &PlantState, u: f64) -> Result<PlantState, Error> {
        if x.dim() != self.dim() {
            return Err(domain(format!("{} expects a {}-dimensional state, got {}", self.id(), self.dim(), x.dim())));
        }
        if !x.is_finite() || !u.is_finite() {
            return Err(domain("state and input must be finite"));
        }
        Ok(self.vector_field(x, u))
    }

    pub fn saturate(&self, u_raw: f64) -> f64 {
        let lim = self.input_limit();
        u_raw.clamp(-lim, lim)
    }

    /// Central-difference Jacobians at the zero state and zero input.
    pub fn linearize(&self) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.dim();
        let x0 = PlantState::zeros(n);
        let mut a = DMatrix::zeros(n, n);
        for j in 0..n {
            let h = 1e-6 * x0[j].abs().max(1.0);
            let mut xp = x0;
            let mut xm = x0;
            xp[j] += h;
            xm[j] -= h;
            let fp = self.vector_field(&xp, 0.0);
            let fm = self.vector_field(&xm, 0.0);
            for i in 0..n {
                a[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let h = 1e-6;
        let fp = self.vector_field(&x0, h);
        let fm = self.vector_field(&x0, -h);
        let b = DVector::from_fn(n, |i, _| (fp[i] - fm[i]) / (2.0 * h));
        (a, b)
    }

    /// Number of parameters subject to parametric uncertainty.
    ///
    /// Gravity and the actuator limit are treated as exact.
    pub fn uncertain_count(&self) -> usize {
        match self {
            PlantModel::DcMotor(_) => 5,
            PlantModel::BallBeam(_) => 4,
            PlantModel::Pendulum(_) => 3,
            PlantModel::DoublePendulum(_) => 4,
        }
    }

    /// Copy with each uncertain parameter multiplied by the matching factor.
    pub fn scaled(&self, factors: &[f64]) -> PlantModel {
        let f = |i: usize| factors.get(i).copied().unwrap_or(1.0);
        match *self {
            PlantModel::DcMotor(p) => PlantModel::DcMotor(DcMotorParams {
                motor_constant: p.motor_constant * f(0),
                resistance: p.resistance * f(1),
                inductance: p.inductance * f(2),
                inertia: p.inertia * f(3),
                damping: p.damping * f(4),
                ..p
            }),
            PlantModel::BallBeam(p) => PlantModel::BallBeam(BallBeamParams {
                ball_radius: p.ball_radius * f(0),
                ball_mass: p.ball_mass * f(1),
                ball_inertia: p.ball_inertia * f(2),
                damping: p.damping * f(3),
                ..p
            }),
            PlantModel::Pendulum(p) => PlantModel::Pendulum(PendulumParams {
                mass: p.mass * f(0),
                length: p.length * f(1),
                damping: p.damping * f(2),
                ..p
            }),
            PlantModel::DoublePendulum(p) => PlantModel::DoublePendulum(DoublePendulumParams {
                mass1: p.mass1 * f(0),
                mass2: p.mass2 * f(1),
                length1: p.length1 * f(2),
                length2: p.length2 * f(3),
                ..p
            }),
        }
    }
}
