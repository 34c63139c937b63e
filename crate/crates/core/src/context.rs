//! Everything an agent is shown for one call.
//!
//! The orchestrator assembles an [`AgentContext`] per call; prompt rendering
//! and the rule-based agents are both pure functions of it.

use alloc::string::String;
use alloc::vec::Vec;

use crate::analysis::{Convergence, Improvement, ParameterStatistics};
use crate::buffer::IterationRecord;
use crate::controller::{ControllerKind, Gains, Ranges};
use crate::heuristics::HeuristicPolicy;
use crate::metrics::Targets;
use crate::plant::PlantModel;
use crate::protocol::{CriticFeedback, Role};
use crate::scenario::Scenario;

#[derive(Clone, Debug, PartialEq)]
pub struct AgentContext {
    pub role: Role,
    pub plant: PlantModel,
    pub seed: u64,
    pub targets: Targets,
    pub max_iterations: usize,
    pub min_iterations: usize,
    /// Iteration within the current round, from 1.
    pub iteration: usize,
    pub round: usize,
    pub controller: Option<ControllerKind>,
    pub gain_names: Vec<String>,
    pub ranges: Ranges,
    pub global_ranges: Ranges,
    /// Earlier records of the stage for the actor and critic; for the
    /// terminator the trend window ending at the current record.
    pub history: Vec<IterationRecord>,
    /// Best earlier attempts of the stage, best first.
    pub best: Vec<IterationRecord>,
    pub current: Option<IterationRecord>,
    pub feedback: Option<CriticFeedback>,
    pub improvement: Option<Improvement>,
    pub convergence: Option<Convergence>,
    pub statistics: Option<ParameterStatistics>,
    /// Iterations completed in the current round.
    pub round_iterations: usize,
    pub reconsiderations: usize,
    /// Controllers still available to the selector, with their ranges.
    pub candidates: Vec<(ControllerKind, Ranges)>,
    /// Scenario under test; for the scenarist, the ladder default for the level.
    pub scenario: Option<Scenario>,
    pub scenario_level: usize,
    pub scenario_levels: usize,
    pub selected: Option<(ControllerKind, Gains)>,
    pub policy: HeuristicPolicy,
}

impl AgentContext {
    pub fn new(role: Role, plant: PlantModel, seed: u64, targets: Targets) -> Self {
        AgentContext {
            role,
            plant,
            seed,
            targets,
            max_iterations: 0,
            min_iterations: 0,
            iteration: 0,
            round: 0,
            controller: None,
            gain_names: Vec::new(),
            ranges: Ranges::new(),
            global_ranges: Ranges::new(),
            history: Vec::new(),
            best: Vec::new(),
            current: None,
            feedback: None,
            improvement: None,
            convergence: None,
            statistics: None,
            round_iterations: 0,
            reconsiderations: 0,
            candidates: Vec::new(),
            scenario: None,
            scenario_level: 0,
            scenario_levels: 0,
            selected: None,
            policy: HeuristicPolicy::default(),
        }
    }

    /// Whether the scenario under test injects measurement noise.
    pub fn noisy(&self) -> bool {
        self.scenario.as_ref().is_some_and(|s| s.randomness_level > 0.0)
    }
}
