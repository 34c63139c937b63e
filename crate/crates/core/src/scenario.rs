//! Seeded realization of test scenarios.
//!
//! An [`EpisodeDraw`] holds the per-episode random choices (initial
//! condition, parameter multipliers) and the seed of two counter-addressed
//! ChaCha streams for measurement noise and actuator disturbance. Noise for
//! step `k` and the disturbance level for hold interval `j` are pure
//! functions of `(draw, k)` and `(draw, j)`, so replays are exact and
//! episodes can be evaluated out of order.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error};
use crate::plant::{PlantId, PlantModel, PlantState};

/// Hold interval of the piecewise-constant actuator disturbance, seconds.
pub const DISTURBANCE_HOLD: f64 = 1.0;

const STREAM_EPISODE: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_DISTURBANCE: u64 = 2;
/// ChaCha words reserved per noise step; generous so rejection sampling never spills.
const NOISE_WORDS_PER_STEP: u128 = 256;
const DISTURBANCE_WORDS_PER_HOLD: u128 = 16;

/// Test conditions, serialized exactly as the scenarist agent emits them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub randomness_level: f64,
    pub param_uncertainty: f64,
    pub initial_condition_range: [f64; 2],
    pub disturbance_level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning: Option<String>,
}

impl Scenario {
    pub fn nominal(id: &str, ic: f64) -> Scenario {
        Scenario {
            id: id.into(),
            randomness_level: 0.0,
            param_uncertainty: 0.0,
            initial_condition_range: [ic, ic],
            disturbance_level: 0.0,
            reasoning: None,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let [lo, hi] = self.initial_condition_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(config(format!("scenario {}: initial_condition_range needs lo <= hi", self.id)));
        }
        if !(self.randomness_level >= 0.0 && self.randomness_level.is_finite()) {
            return Err(config(format!("scenario {}: randomness_level must be >= 0", self.id)));
        }
        if !(self.disturbance_level >= 0.0 && self.disturbance_level.is_finite()) {
            return Err(config(format!("scenario {}: disturbance_level must be >= 0", self.id)));
        }
        if !(self.param_uncertainty >= 0.0 && self.param_uncertainty < 1.0) {
            return Err(config(format!("scenario {}: param_uncertainty must lie in [0, 1)", self.id)));
        }
        Ok(())
    }

    pub fn is_deterministic(&self) -> bool {
        self.randomness_level == 0.0
            && self.disturbance_level == 0.0
            && self.param_uncertainty == 0.0
            && self.initial_condition_range[0] == self.initial_condition_range[1]
    }
}

/// Default three-level ladder: nominal, noise plus disturbance, parametric uncertainty.
pub fn default_ladder(plant: PlantId) -> Vec<Scenario> {
    let (ic, sigma, dist, rho, dist3) = match plant {
        PlantId::DcMotor => ([core::f64::consts::PI; 2], 0.01, 1.0, 0.2, 0.0),
        PlantId::BallBeam => ([1.0, 1.0], 0.01, 1.0, 0.2, 0.0),
        PlantId::Pendulum => ([2.0, 2.2], 0.01, 0.1, 0.2, 0.1),
        PlantId::DoublePendulum => ([0.1, 0.1], 0.002, 0.2, 0.2, 0.0),
    };
    let mk = |id: &str, s: f64, d: f64, r: f64| Scenario {
        id: id.into(),
        randomness_level: s,
        param_uncertainty: r,
        initial_condition_range: ic,
        disturbance_level: d,
        reasoning: None,
    };
    alloc::vec![mk("I", 0.0, 0.0, 0.0), mk("II", sigma, dist, 0.0), mk("III", 0.0, dist3, rho)]
}

/// Everything random about one episode, fixed by `(scenario, seed)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeDraw {
    pub seed: u64,
    pub initial_value: f64,
    pub multipliers: Vec<f64>,
    pub noise_std: f64,
    pub disturbance_amp: f64,
}

pub fn draw_episode(scenario: &Scenario, plant: &PlantModel, seed: u64) -> EpisodeDraw {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_EPISODE);
    let [lo, hi] = scenario.initial_condition_range;
    let initial_value = if hi > lo { rng.random_range(lo..=hi) } else { lo };
    let rho = scenario.param_uncertainty;
    let multipliers = (0..plant.uncertain_count())
        .map(|_| if rho > 0.0 { 1.0 + rng.random_range(-rho..=rho) } else { 1.0 })
        .collect();
    EpisodeDraw {
        seed,
        initial_value,
        multipliers,
        noise_std: scenario.randomness_level,
        disturbance_amp: scenario.disturbance_level,
    }
}

impl EpisodeDraw {
    /// Plant with this episode's parameter multipliers applied.
    pub fn perturbed(&self, plant: &PlantModel) -> PlantModel {
        plant.scaled(&self.multipliers)
    }

    pub fn initial_state(&self, plant: &PlantModel) -> PlantState {
        let mut x = PlantState::zeros(plant.dim());
        x[plant.regulated_index()] = self.initial_value;
        x
    }
}

/// `state` plus i.i.d. Gaussian noise for simulation step `step`.
pub fn measurement_noise(draw: &EpisodeDraw, step: u64, state: &PlantState) -> PlantState {
    if draw.noise_std == 0.0 {
        return *state;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(draw.seed);
    rng.set_stream(STREAM_NOISE);
    rng.set_word_pos(step as u128 * NOISE_WORDS_PER_STEP);
    let normal = Normal::new(0.0, draw.noise_std).expect("validated std");
    let mut out = *state;
    for v in out.as_mut_slice() {
        *v += normal.sample(&mut rng);
    }
    out
}

/// Disturbance level active at time `t`; constant on each hold interval.
pub fn actuator_disturbance(draw: &EpisodeDraw, t: f64) -> f64 {
    if draw.disturbance_amp == 0.0 {
        return 0.0;
    }
    let hold = libm::floor(t / DISTURBANCE_HOLD + 1e-9).max(0.0) as u128;
    let mut rng = ChaCha8Rng::seed_from_u64(draw.seed);
    rng.set_stream(STREAM_DISTURBANCE);
    rng.set_word_pos(hold * DISTURBANCE_WORDS_PER_HOLD);
    let a = draw.disturbance_amp;
    rng.random_range(-a..=a)
}
