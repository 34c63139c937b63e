//! Fixed-step closed-loop simulation.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::controller::{ControlLaw, ControllerSpec, ControllerState};
use crate::error::{config, Error};
use crate::plant::{PlantId, PlantModel, PlantState, DIVERGENCE_BOUND};
use crate::scenario::{actuator_disturbance, draw_episode, measurement_noise, Scenario};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SimConfig {
    /// Per-plant defaults: 10 ms steps; horizon long enough to settle.
    pub fn default_for(plant: PlantId) -> SimConfig {
        let horizon = match plant {
            PlantId::DcMotor | PlantId::DoublePendulum => 10.0,
            PlantId::BallBeam => 20.0,
            PlantId::Pendulum => 5.0,
        };
        SimConfig { dt: 0.01, horizon, seed: 0 }
    }

    pub fn steps(&self) -> usize {
        libm::round(self.horizon / self.dt) as usize
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(config("dt must be positive"));
        }
        if !(self.horizon >= 10.0 * self.dt) {
            return Err(config("horizon must span at least 10 steps"));
        }
        let n = self.horizon / self.dt;
        if (n - libm::round(n)).abs() > 1e-6 * n.max(1.0) {
            return Err(config("horizon must be an integer multiple of dt"));
        }
        Ok(())
    }
}

/// Sampled closed-loop response; all vectors have `steps + 1` entries.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub time: Vec<f64>,
    pub states: Vec<PlantState>,
    /// Controller output after saturation, before the disturbance.
    pub control: Vec<f64>,
    /// Noise-free error `reference - regulated output`.
    pub error: Vec<f64>,
    pub diverged: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

/// One classic fourth-order Runge-Kutta step of `f` from `x`.
pub fn rk4_step<F>(f: F, x: &PlantState, dt: f64) -> PlantState
where
    F: Fn(&PlantState) -> PlantState,
{
    let k1 = f(x);
    let k2 = f(&x.add_scaled(&k1, 0.5 * dt));
    let k3 = f(&x.add_scaled(&k2, 0.5 * dt));
    let k4 = f(&x.add_scaled(&k3, dt));
    let mut out = *x;
    for i in 0..x.dim() {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// RK4 step of the plant with the input held constant.
pub fn integrate_step(plant: &PlantModel, x: &PlantState, u: f64, dt: f64) -> PlantState {
    rk4_step(|s| plant.vector_field(s, u), x, dt)
}

/// Simulates `spec` on `plant` under `scenario` with the episode drawn from `seed`.
pub fn run_episode(
    plant: &PlantModel,
    spec: &ControllerSpec,
    scenario: &Scenario,
    sim: &SimConfig,
    seed: u64,
) -> Result<Trajectory, Error> {
    sim.validate()?;
    plant.validate()?;
    scenario.validate()?;
    let law = ControlLaw::compile(spec, plant)?;
    let draw = draw_episode(scenario, plant, seed);
    let true_plant = draw.perturbed(plant);
    let reg = plant.regulated_index();
    let limit = plant.input_limit();
    let reference = 0.0;
    let n = sim.steps();

    let mut traj = Trajectory {
        time: Vec::with_capacity(n + 1),
        states: Vec::with_capacity(n + 1),
        control: Vec::with_capacity(n + 1),
        error: Vec::with_capacity(n + 1),
        diverged: false,
    };
    let mut x = draw.initial_state(plant);
    let mut cs = ControllerState::default();
    let mut u = 0.0;
    for k in 0..=n {
        let t = k as f64 * sim.dt;
        if !traj.diverged {
            let y = measurement_noise(&draw, k as u64, &x);
            let (u_raw, next) = law.step(cs, &y, reference, sim.dt);
            cs = next;
            u = plant.saturate(u_raw);
            if !u.is_finite() {
                u = 0.0;
            }
        }
        traj.time.push(t);
        traj.states.push(x);
        traj.error.push(reference - x[reg]);
        traj.control.push(u);
        if k == n || traj.diverged {
            continue;
        }
        let u_eff = (u + actuator_disturbance(&draw, t)).clamp(-2.0 * limit, 2.0 * limit);
        let next = integrate_step(&true_plant, &x, u_eff, sim.dt);
        if !next.is_finite() {
            traj.diverged = true;
        } else {
            x = next;
            if x.max_abs() > DIVERGENCE_BOUND {
                traj.diverged = true;
            }
        }
    }
    Ok(traj)
}
