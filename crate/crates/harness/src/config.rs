//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use loopsmith_core::backends::{AgentBackend, AgentBinding, HeuristicBackend};
use loopsmith_core::controller::{ControllerKind, ControllerSpec, Gains, Ranges};
use loopsmith_core::heuristics::HeuristicPolicy;
use loopsmith_core::lqr::lqr_gains;
use loopsmith_core::metrics::Targets;
use loopsmith_core::orchestrator::{LoopConfig, RunSpec};
use loopsmith_core::plant::{PlantId, PlantModel};
use loopsmith_core::protocol::Role;
use loopsmith_core::scenario::{default_ladder, Scenario};
use loopsmith_core::sim::SimConfig;
use serde::{Deserialize, Serialize};

use crate::chat::{ChatClient, ChatEndpointConfig, LiveBackend};
use crate::error::{HarnessError, Result};
use crate::transcript::{self, Recording, Sink};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantId,
    /// Replaces the nominal plant parameters, e.g. `{"plant": "dc_motor", "params": {...}}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant_model: Option<PlantModel>,
    /// Controllers to try, in order; defaults to every controller the plant supports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controllers: Option<Vec<ControllerKind>>,
    /// Global search limits keyed by controller type.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ranges: BTreeMap<String, Ranges>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<Vec<Scenario>>,
    pub targets: Targets,
    #[serde(default, rename = "loop")]
    pub loop_cfg: LoopConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimConfig>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub use_selector: bool,
    #[serde(default)]
    pub use_scenarist: bool,
    #[serde(default)]
    pub policy: HeuristicPolicy,
    /// Backend per role; the key `default` covers roles not listed.
    #[serde(default)]
    pub agents: BTreeMap<String, AgentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub montecarlo: Option<MonteCarloConfig>,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentSpec {
    Heuristic,
    Replay { transcript: PathBuf },
    Live { endpoint: ChatEndpointConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Scenarios to tabulate; defaults to the run ladder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<Scenario>>,
    pub methods: Vec<MethodConfig>,
}

fn default_runs() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: GainSource,
}

/// Where a Monte Carlo method gets its fixed gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GainSource {
    Literal {
        controller: ControllerKind,
        gains: Vec<f64>,
    },
    Lqr {
        lqr: LqrWeights,
    },
    /// Best gains of the last scenario a finished run reached.
    Report {
        report: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LqrWeights {
    pub q: Vec<f64>,
    pub r: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative file references relative to the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        for spec in self.agents.values_mut() {
            if let AgentSpec::Replay { transcript } = spec {
                if transcript.is_relative() {
                    *transcript = base.join(&*transcript);
                }
            }
        }
        if let Some(mc) = &mut self.montecarlo {
            for m in &mut mc.methods {
                if let GainSource::Report { report } = &mut m.source {
                    if report.is_relative() {
                        *report = base.join(&*report);
                    }
                }
            }
        }
    }

    pub fn plant_model(&self) -> PlantModel {
        self.plant_model.unwrap_or_else(|| PlantModel::nominal(self.plant))
    }

    pub fn ladder(&self) -> Vec<Scenario> {
        self.ladder.clone().unwrap_or_else(|| default_ladder(self.plant))
    }

    pub fn sim(&self) -> SimConfig {
        self.sim.unwrap_or_else(|| SimConfig::default_for(self.plant))
    }

    pub fn run_spec(&self, seed: u64) -> Result<RunSpec> {
        let mut spec = RunSpec::new(self.plant, self.targets);
        spec.plant = self.plant_model();
        if let Some(c) = &self.controllers {
            spec.controllers = c.clone();
        }
        for (k, r) in &self.ranges {
            spec.ranges.push((k.parse()?, r.clone()));
        }
        spec.ladder = self.ladder();
        spec.loop_cfg = self.loop_cfg;
        spec.sim = self.sim();
        spec.seed = seed;
        spec.use_selector = self.use_selector;
        spec.use_scenarist = self.use_scenarist;
        spec.policy = self.policy;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.plant_model.is_some_and(|m| m.id() != self.plant) {
            return Err(HarnessError::Config("plant_model does not describe the configured plant".into()));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds must not be empty".into()));
        }
        for key in self.agents.keys() {
            if key != "default" {
                key.parse::<Role>()?;
            }
        }
        for spec in self.agents.values() {
            if let AgentSpec::Live { endpoint } = spec {
                endpoint.validate()?;
            }
        }
        if let Some(mc) = &self.montecarlo {
            if mc.runs == 0 || mc.methods.is_empty() {
                return Err(HarnessError::Config("montecarlo needs runs > 0 and at least one method".into()));
            }
        }
        self.run_spec(self.seeds[0])?.validate()?;
        Ok(())
    }

    fn agent_spec(&self, role: Role) -> AgentSpec {
        self.agents.get(role.as_str()).or_else(|| self.agents.get("default")).cloned().unwrap_or(AgentSpec::Heuristic)
    }

    /// Builds the role bindings; every reply is also recorded into `sink`.
    ///
    /// Roles that share one transcript file each draw their own queue from it.
    pub fn binding(&self, sink: &Sink) -> Result<AgentBinding> {
        let build = |spec: AgentSpec, role: Role| -> Result<Box<dyn AgentBackend>> {
            Ok(match spec {
                AgentSpec::Heuristic => Box::new(Recording::new(HeuristicBackend, sink.clone())),
                AgentSpec::Replay { transcript: path } => {
                    Box::new(Recording::new(transcript::replay_from(&path, Some(role))?, sink.clone()))
                }
                AgentSpec::Live { endpoint } => {
                    Box::new(Recording::new(LiveBackend::new(ChatClient::new(endpoint)?), sink.clone()))
                }
            })
        };
        let mut binding = AgentBinding::new(Box::new(Recording::new(HeuristicBackend, sink.clone())));
        for role in Role::ALL {
            binding = binding.with(role, build(self.agent_spec(role), role)?);
        }
        Ok(binding)
    }
}

impl MethodConfig {
    /// Controller and gains for this method on `plant`.
    pub fn resolve(&self, plant: &PlantModel) -> Result<ControllerSpec> {
        match &self.source {
            GainSource::Literal { controller, gains } => Ok(ControllerSpec::with_gains(*controller, plant, gains)?),
            GainSource::Lqr { lqr } => Ok(lqr_gains(plant, &lqr.q, lqr.r)?.0),
            GainSource::Report { report } => {
                let text = std::fs::read_to_string(report)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", report.display())))?;
                let r: loopsmith_core::orchestrator::FinalReport = serde_json::from_str(&text)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", report.display())))?;
                let res = r
                    .results
                    .iter()
                    .rev()
                    .find(|s| s.best.is_some())
                    .ok_or_else(|| HarnessError::Config(format!("{} has no best attempt", report.display())))?;
                let gains: Gains = res.best.as_ref().expect("filtered on best").gains.clone();
                let values: Vec<f64> = gains.values().copied().collect();
                Ok(ControllerSpec::with_gains(res.controller, plant, &values)?)
            }
        }
    }
}
