//! The design loop.
//!
//! The outer loop picks a controller and walks it up the scenario ladder.
//! Each ladder level runs inner actor-critic loops until the terminator
//! reports success or the budget runs out; after a failed loop the juror
//! either narrows the search box or gives up on the controller, in which
//! case the next controller restarts from the bottom of the ladder.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::{convergence_analysis, improvement_analysis, parameter_statistics, ANALYSIS_WINDOW};
use crate::backends::AgentBinding;
use crate::buffer::{history_len, BestBy, IterationRecord, SharedBuffer};
use crate::context::AgentContext;
use crate::controller::{default_ranges, ControllerKind, ControllerSpec, GainRange, Gains, Ranges};
use crate::error::{config, Error};
use crate::heuristics::HeuristicPolicy;
use crate::metrics::{compute_metrics, Targets, TrajectoryMetrics};
use crate::plant::{PlantId, PlantModel};
use crate::prompt::{render_prompt, Prompt};
use crate::protocol::{
    parse_agent_json, AgentMessage, ClampWarning, Decision, JurorDecision, JurorVerdict, Role, SelectorChoice,
    FORMAT_REMINDER,
};
use crate::scenario::{default_ladder, Scenario};
use crate::sim::{run_episode, SimConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopConfig {
    pub max_iterations: usize,
    /// Terminations before this iteration are overridden to CONTINUE.
    pub min_iterations: usize,
    /// Consecutive failed agent iterations that end a loop.
    pub failure_cap: usize,
    /// Range reconsiderations allowed per controller and scenario.
    pub reconsideration_cap: usize,
    /// Best attempts shown to agents.
    pub best_k: usize,
    pub best_by: BestBy,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            max_iterations: 30,
            min_iterations: 6,
            failure_cap: 3,
            reconsideration_cap: 10,
            best_k: 2,
            best_by: BestBy::Mse,
        }
    }
}

/// Everything needed to start a run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub plant: PlantModel,
    /// Controllers in the order they are tried.
    pub controllers: Vec<ControllerKind>,
    /// Global search limits per controller; controllers not listed use the defaults.
    pub ranges: Vec<(ControllerKind, Ranges)>,
    pub ladder: Vec<Scenario>,
    pub targets: Targets,
    pub loop_cfg: LoopConfig,
    pub sim: SimConfig,
    pub seed: u64,
    /// Ask the selector agent for each controller instead of taking the queue in order.
    pub use_selector: bool,
    /// Ask the scenarist agent for each ladder level instead of using the ladder as given.
    pub use_scenarist: bool,
    pub policy: HeuristicPolicy,
}

impl RunSpec {
    /// Default run for `plant`: every controller with default ranges, the default ladder.
    pub fn new(plant: PlantId, targets: Targets) -> Self {
        let controllers = ControllerKind::ALL.iter().copied().filter(|k| default_ranges(*k, plant).is_ok()).collect();
        RunSpec {
            plant: PlantModel::nominal(plant),
            controllers,
            ranges: Vec::new(),
            ladder: default_ladder(plant),
            targets,
            loop_cfg: LoopConfig::default(),
            sim: SimConfig::default_for(plant),
            seed: 0,
            use_selector: false,
            use_scenarist: false,
            policy: HeuristicPolicy::default(),
        }
    }

    pub fn global_ranges(&self, kind: ControllerKind) -> Result<Ranges, Error> {
        match self.ranges.iter().find(|(k, _)| *k == kind) {
            Some((_, r)) => Ok(r.clone()),
            None => default_ranges(kind, self.plant.id()),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.plant.validate()?;
        self.sim.validate()?;
        if self.controllers.is_empty() {
            return Err(config("controller queue is empty"));
        }
        if self.ladder.is_empty() {
            return Err(config("scenario ladder is empty"));
        }
        for s in &self.ladder {
            s.validate()?;
        }
        let c = &self.loop_cfg;
        if c.max_iterations == 0 || c.best_k == 0 || c.failure_cap == 0 {
            return Err(config("max_iterations, best_k and failure_cap must be positive"));
        }
        let t = &self.targets;
        if !(t.mse > 0.0 && t.settling_time > 0.0 && t.overshoot > 0.0) {
            return Err(config("targets must be positive"));
        }
        for k in &self.controllers {
            let r = self.global_ranges(*k)?;
            let names = k.gain_names(&self.plant);
            if r.len() != names.len() || names.iter().any(|n| !r.get(n).is_some_and(|g| g.is_valid())) {
                return Err(config(format!(
                    "ranges for {k} must give a valid [min, max] for each of {}",
                    names.join(", ")
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LoopOutcome {
    Success,
    Redesign,
    BudgetExhausted,
}

/// Notifications for hosts that log or time the run.
#[derive(Debug)]
pub enum RunEvent<'a> {
    ControllerSelected { kind: ControllerKind, choice: &'a SelectorChoice },
    ScenarioStarted { level: usize, scenario: &'a Scenario },
    Iteration(&'a IterationRecord),
    LoopFinished { outcome: LoopOutcome, iterations: usize, round: usize },
    Juror { verdict: &'a JurorVerdict, applied: Option<&'a Ranges> },
    AgentFailure { role: Role, error: &'a Error },
    ScenarioFinished { level: usize, completed: bool },
}

pub trait Observer {
    fn on_event(&mut self, event: &RunEvent<'_>);
}

impl Observer for () {
    fn on_event(&mut self, _: &RunEvent<'_>) {}
}

/// Mutable state of a run: position on the ladder, current controller and search box.
#[derive(Clone, Debug)]
pub struct RunState {
    pub spec: RunSpec,
    pub buffer: SharedBuffer,
    pub controller: ControllerKind,
    pub global_ranges: Ranges,
    pub ranges: Ranges,
    pub level: usize,
    pub scenario: Scenario,
    pub stage: usize,
    pub round: usize,
    pub reconsiderations: usize,
    pub agent_failures: usize,
    next_seq: usize,
}

impl RunState {
    /// State positioned on `controller` at the first ladder level.
    pub fn new(spec: RunSpec, controller: ControllerKind) -> Result<Self, Error> {
        spec.validate()?;
        let global = spec.global_ranges(controller)?;
        let scenario = spec.ladder[0].clone();
        Ok(RunState {
            spec,
            buffer: SharedBuffer::new(),
            controller,
            ranges: global.clone(),
            global_ranges: global,
            level: 0,
            scenario,
            stage: 0,
            round: 0,
            reconsiderations: 0,
            agent_failures: 0,
            next_seq: 1,
        })
    }

    fn enter_stage(&mut self, controller: ControllerKind, level: usize, scenario: Scenario) -> Result<(), Error> {
        if !self.buffer.is_empty() || self.next_seq > 1 {
            self.stage += 1;
        }
        self.controller = controller;
        self.global_ranges = self.spec.global_ranges(controller)?;
        self.ranges = self.global_ranges.clone();
        self.level = level;
        self.scenario = scenario;
        self.round = 0;
        self.reconsiderations = 0;
        Ok(())
    }

    fn base_ctx(&self, role: Role) -> AgentContext {
        let s = &self.spec;
        let mut ctx = AgentContext::new(role, s.plant, s.seed, s.targets);
        ctx.max_iterations = s.loop_cfg.max_iterations;
        ctx.min_iterations = s.loop_cfg.min_iterations;
        ctx.round = self.round;
        ctx.controller = Some(self.controller);
        ctx.gain_names = self.controller.gain_names(&s.plant);
        ctx.ranges = self.ranges.clone();
        ctx.global_ranges = self.global_ranges.clone();
        ctx.reconsiderations = self.reconsiderations;
        ctx.scenario = Some(self.scenario.clone());
        ctx.scenario_level = self.level;
        ctx.scenario_levels = s.ladder.len();
        ctx.policy = s.policy;
        ctx
    }

    fn best(&self, before: usize) -> Vec<IterationRecord> {
        let c = &self.spec.loop_cfg;
        self.buffer.best(self.stage, before, c.best_k, c.best_by, &self.spec.targets).into_iter().cloned().collect()
    }

    /// Best attempt of the current stage.
    pub fn stage_best(&self) -> Option<IterationRecord> {
        self.best(usize::MAX).into_iter().next()
    }
}

/// Renders, asks, parses and validates; one re-prompt with a format reminder on a format failure.
fn ask<T>(
    binding: &mut AgentBinding,
    ctx: &AgentContext,
    accept: impl Fn(AgentMessage) -> Result<T, Error>,
) -> Result<T, Error> {
    let prompt = render_prompt(ctx);
    let attempt = |binding: &mut AgentBinding, p: &Prompt| -> Result<T, Error> {
        let raw = binding.respond(ctx, p)?;
        accept(parse_agent_json(&raw, ctx.role)?)
    };
    match attempt(binding, &prompt) {
        Err(e) if e.is_format() => {
            let retry =
                Prompt { system: prompt.system.clone(), user: format!("{}\n\n{}", prompt.user, FORMAT_REMINDER) };
            attempt(binding, &retry)
        }
        other => other,
    }
}

fn fatal(e: &Error) -> bool {
    !e.is_format()
}

/// One actor-critic loop on the current controller, scenario and ranges.
pub fn run_inner_loop(
    state: &mut RunState,
    binding: &mut AgentBinding,
    observer: &mut dyn Observer,
) -> Result<LoopOutcome, Error> {
    let cfg = state.spec.loop_cfg;
    let names = state.controller.gain_names(&state.spec.plant);
    let mut consecutive = 0;
    let mut completed = 0;
    let mut outcome = LoopOutcome::BudgetExhausted;

    for iteration in 1..=cfg.max_iterations {
        let seq = state.next_seq;
        state.next_seq += 1;
        let mut ctx = state.base_ctx(Role::Actor);
        ctx.iteration = iteration;
        ctx.round_iterations = completed;
        ctx.history = state.buffer.recent(state.stage, seq, history_len(iteration)).into_iter().cloned().collect();
        ctx.best = state.best(seq);
        ctx.feedback = state.buffer.latest_feedback(state.stage, seq).cloned();

        let ranges = state.ranges.clone();
        let proposal = ask(binding, &ctx, |m| match m {
            AgentMessage::Actor(p) => p.conform(&names, &ranges),
            _ => Err(Error::Schema("expected an actor reply".into())),
        });
        let (gains, clamp_warnings): (Gains, Vec<ClampWarning>) = match proposal {
            Ok(v) => v,
            Err(e) => {
                observer.on_event(&RunEvent::AgentFailure { role: Role::Actor, error: &e });
                state.agent_failures += 1;
                consecutive += 1;
                if consecutive >= cfg.failure_cap {
                    if fatal(&e) {
                        return Err(e);
                    }
                    break;
                }
                continue;
            }
        };

        let spec = ControllerSpec { kind: state.controller, gains: gains.clone(), ranges: state.ranges.clone() };
        let traj = run_episode(&state.spec.plant, &spec, &state.scenario, &state.spec.sim, state.spec.seed)?;
        let metrics: TrajectoryMetrics = compute_metrics(&traj);
        let mut record = IterationRecord {
            seq,
            stage: state.stage,
            round: state.round,
            controller: state.controller,
            scenario: state.scenario.id.clone(),
            scenario_level: state.level,
            iteration,
            max_iterations: cfg.max_iterations,
            gains,
            metrics,
            critic: None,
            verdict: None,
            decision: None,
            clamp_warnings,
            agent_errors: Vec::new(),
            wall_time: None,
        };
        let mut failed: Option<Error> = None;

        ctx.role = Role::Critic;
        ctx.feedback = None;
        ctx.current = Some(record.clone());
        match ask(binding, &ctx, |m| match m {
            AgentMessage::Critic(c) => Ok(c),
            _ => Err(Error::Schema("expected a critic reply".into())),
        }) {
            Ok(c) => record.critic = Some(c),
            Err(e) => {
                observer.on_event(&RunEvent::AgentFailure { role: Role::Critic, error: &e });
                record.agent_errors.push(e.to_string());
                failed = Some(e);
            }
        }
        state.buffer.push(record.clone());
        completed += 1;

        if failed.as_ref().is_none_or(|e| !fatal(e)) {
            let window_len = (history_len(iteration) + 1).min(ANALYSIS_WINDOW);
            let trend: Vec<IterationRecord> =
                state.buffer.recent(state.stage, seq + 1, window_len).into_iter().cloned().collect();
            let ms: Vec<TrajectoryMetrics> = trend.iter().map(|r| r.metrics).collect();
            let gs: Vec<Gains> = trend.iter().map(|r| r.gains.clone()).collect();
            ctx.role = Role::Terminator;
            ctx.improvement = improvement_analysis(&ms).ok();
            ctx.convergence = convergence_analysis(&gs).ok();
            ctx.history = trend;
            ctx.best = state.best(seq + 1);
            ctx.current = Some(record.clone());
            ctx.round_iterations = completed;
            match ask(binding, &ctx, |m| match m {
                AgentMessage::Terminator(t) => Ok(t),
                _ => Err(Error::Schema("expected a terminator reply".into())),
            }) {
                Ok(v) => record.verdict = Some(v),
                Err(e) => {
                    observer.on_event(&RunEvent::AgentFailure { role: Role::Terminator, error: &e });
                    record.agent_errors.push(e.to_string());
                    failed = Some(e);
                }
            }
        }

        let decision = match &record.verdict {
            Some(v) if iteration >= cfg.min_iterations => v.decision,
            _ => Decision::Continue,
        };
        record.decision = Some(decision);
        if let Some(last) = state.buffer.last_mut() {
            *last = record.clone();
        }
        observer.on_event(&RunEvent::Iteration(&record));

        match failed {
            Some(e) => {
                state.agent_failures += 1;
                consecutive += 1;
                if consecutive >= cfg.failure_cap {
                    if fatal(&e) {
                        return Err(e);
                    }
                    break;
                }
            }
            None => consecutive = 0,
        }
        match decision {
            Decision::TerminateSuccess => {
                outcome = LoopOutcome::Success;
                break;
            }
            Decision::TerminateRedesign => {
                outcome = LoopOutcome::Redesign;
                break;
            }
            Decision::Continue => {}
        }
    }
    observer.on_event(&RunEvent::LoopFinished { outcome, iterations: completed, round: state.round });
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestAttempt {
    pub seq: usize,
    pub round: usize,
    pub iteration: usize,
    pub gains: Gains,
    pub metrics: TrajectoryMetrics,
}

impl From<&IterationRecord> for BestAttempt {
    fn from(r: &IterationRecord) -> Self {
        BestAttempt { seq: r.seq, round: r.round, iteration: r.iteration, gains: r.gains.clone(), metrics: r.metrics }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSummary {
    pub round: usize,
    pub outcome: LoopOutcome,
    pub iterations: usize,
    pub ranges: Ranges,
    #[serde(default)]
    pub juror: Option<JurorVerdict>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub level: usize,
    pub scenario: Scenario,
    pub controller: ControllerKind,
    pub completed: bool,
    pub reconsiderations: usize,
    pub loops: Vec<LoopSummary>,
    pub best: Option<BestAttempt>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    Partial,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub plant: PlantId,
    pub seed: u64,
    pub status: RunStatus,
    pub scenarios_completed: usize,
    pub scenarios_total: usize,
    pub summary: String,
    pub controllers_tried: Vec<ControllerKind>,
    pub final_controller: ControllerKind,
    pub total_iterations: usize,
    pub agent_failures: usize,
    pub results: Vec<ScenarioResult>,
}

/// A finished run: the report plus the full buffer.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: FinalReport,
    pub buffer: SharedBuffer,
}

/// Lays the juror's ranges over the current ones, clipped to the global limits.
///
/// Gains the juror left out keep their range. A range that would exclude the
/// best gain is widened to include it; an empty intersection keeps the old range.
pub fn merge_ranges(current: &Ranges, proposed: &Ranges, global: &Ranges, best: Option<&Gains>) -> Ranges {
    let mut out = Ranges::new();
    for (name, cur) in current.iter() {
        let mut r = proposed.get(name).copied().unwrap_or(*cur);
        if let Some(g) = global.get(name) {
            r = GainRange::new(r.min.max(g.min), r.max.min(g.max));
        }
        if let Some(v) = best.and_then(|b| b.get(name)) {
            r = GainRange::new(r.min.min(*v), r.max.max(*v));
        }
        out.insert(name, if r.is_valid() { r } else { *cur });
    }
    out
}

fn select_controller(
    state: &RunState,
    queue: &[ControllerKind],
    binding: &mut AgentBinding,
    observer: &mut dyn Observer,
) -> Result<SelectorChoice, Error> {
    let fallback = |kind: ControllerKind| -> Result<SelectorChoice, Error> {
        let r = state.spec.global_ranges(kind)?;
        Ok(SelectorChoice {
            controller_type: kind,
            parameters: r.iter().map(|(k, g)| (k.to_string(), g.mid())).collect(),
            reasoning: "Next controller in the configured order.".into(),
        })
    };
    if !state.spec.use_selector {
        return fallback(queue[0]);
    }
    let mut ctx = state.base_ctx(Role::Selector);
    ctx.controller = None;
    ctx.candidates = queue.iter().map(|k| state.spec.global_ranges(*k).map(|r| (*k, r))).collect::<Result<_, _>>()?;
    match ask(binding, &ctx, |m| match m {
        AgentMessage::Selector(c) if queue.contains(&c.controller_type) => Ok(c),
        AgentMessage::Selector(c) => {
            Err(Error::Schema(format!("{} is not among the remaining controllers", c.controller_type)))
        }
        _ => Err(Error::Schema("expected a selector reply".into())),
    }) {
        Ok(c) => Ok(c),
        Err(e) if fatal(&e) => Err(e),
        Err(e) => {
            observer.on_event(&RunEvent::AgentFailure { role: Role::Selector, error: &e });
            fallback(queue[0])
        }
    }
}

fn design_scenario(
    state: &RunState,
    level: usize,
    selected: &SelectorChoice,
    binding: &mut AgentBinding,
    observer: &mut dyn Observer,
) -> Result<Scenario, Error> {
    let default = state.spec.ladder[level].clone();
    if !state.spec.use_scenarist {
        return Ok(default);
    }
    let mut ctx = state.base_ctx(Role::Scenarist);
    ctx.scenario = Some(default.clone());
    ctx.scenario_level = level;
    ctx.selected = Some((selected.controller_type, selected.parameters.clone()));
    match ask(binding, &ctx, |m| match m {
        AgentMessage::Scenarist(s) => Ok(s),
        _ => Err(Error::Schema("expected a scenarist reply".into())),
    }) {
        Ok(s) => Ok(s),
        Err(e) if fatal(&e) => Err(e),
        Err(e) => {
            observer.on_event(&RunEvent::AgentFailure { role: Role::Scenarist, error: &e });
            Ok(default)
        }
    }
}

fn consult_juror(
    state: &RunState,
    binding: &mut AgentBinding,
    observer: &mut dyn Observer,
) -> Result<JurorVerdict, Error> {
    let mut ctx = state.base_ctx(Role::Juror);
    let round: Vec<&IterationRecord> = state.buffer.round(state.stage, state.round).collect();
    let samples: Vec<(&Gains, bool)> = round.iter().map(|r| (&r.gains, r.metrics.stable)).collect();
    ctx.statistics = parameter_statistics(&samples).ok();
    ctx.round_iterations = round.len();
    ctx.iteration = round.last().map_or(0, |r| r.iteration);
    ctx.best = state.best(usize::MAX);
    ctx.current = round.last().map(|r| (*r).clone());
    match ask(binding, &ctx, |m| match m {
        AgentMessage::Juror(v) => Ok(v),
        _ => Err(Error::Schema("expected a juror reply".into())),
    }) {
        Ok(v) => Ok(v),
        Err(e) if fatal(&e) => Err(e),
        Err(e) => {
            observer.on_event(&RunEvent::AgentFailure { role: Role::Juror, error: &e });
            Ok(JurorVerdict {
                decision: JurorDecision::ExploreFurther,
                new_range: None,
                reasoning: format!("juror reply unusable ({e}); treating it as EXPLORE_FURTHER"),
            })
        }
    }
}

/// Runs the whole design loop to a final report.
pub fn run_full(spec: RunSpec, binding: &mut AgentBinding, observer: &mut dyn Observer) -> Result<RunOutput, Error> {
    let mut queue = spec.controllers.clone();
    let mut state = RunState::new(spec, queue[0])?;
    let levels = state.spec.ladder.len();
    let mut results = Vec::new();
    let mut tried = Vec::new();
    let mut reached = 0;
    let mut all_done = false;

    while !queue.is_empty() {
        let choice = select_controller(&state, &queue, binding, observer)?;
        let kind = choice.controller_type;
        queue.retain(|k| *k != kind);
        tried.push(kind);
        observer.on_event(&RunEvent::ControllerSelected { kind, choice: &choice });

        let mut level = 0;
        while level < levels {
            let scenario = design_scenario(&state, level, &choice, binding, observer)?;
            state.enter_stage(kind, level, scenario)?;
            observer.on_event(&RunEvent::ScenarioStarted { level, scenario: &state.scenario });
            let mut loops = Vec::new();
            let completed = loop {
                let outcome = run_inner_loop(&mut state, binding, observer)?;
                let iterations = state.buffer.round(state.stage, state.round).count();
                let mut summary =
                    LoopSummary { round: state.round, outcome, iterations, ranges: state.ranges.clone(), juror: None };
                if outcome == LoopOutcome::Success {
                    loops.push(summary);
                    break true;
                }
                let verdict = consult_juror(&state, binding, observer)?;
                let reconsider = verdict.decision == JurorDecision::ReconsiderRange
                    && state.reconsiderations < state.spec.loop_cfg.reconsideration_cap;
                let applied = match (&verdict.new_range, reconsider) {
                    (Some(proposed), true) => {
                        let best = state.stage_best().map(|b| b.gains);
                        Some(merge_ranges(&state.ranges, proposed, &state.global_ranges, best.as_ref()))
                    }
                    _ => None,
                };
                observer.on_event(&RunEvent::Juror { verdict: &verdict, applied: applied.as_ref() });
                summary.juror = Some(verdict);
                loops.push(summary);
                match applied {
                    Some(r) => {
                        state.ranges = r;
                        state.reconsiderations += 1;
                        state.round += 1;
                    }
                    None => break false,
                }
            };
            results.push(ScenarioResult {
                level,
                scenario: state.scenario.clone(),
                controller: kind,
                completed,
                reconsiderations: state.reconsiderations,
                loops,
                best: state.stage_best().as_ref().map(BestAttempt::from),
            });
            observer.on_event(&RunEvent::ScenarioFinished { level, completed });
            if !completed {
                break;
            }
            level += 1;
            reached = reached.max(level);
        }
        if level == levels {
            all_done = true;
            break;
        }
    }

    let report = FinalReport {
        plant: state.spec.plant.id(),
        seed: state.spec.seed,
        status: if all_done { RunStatus::Success } else { RunStatus::Partial },
        scenarios_completed: reached,
        scenarios_total: levels,
        summary: format!("Completed {reached} of {levels} scenarios"),
        final_controller: *tried.last().expect("at least one controller was tried"),
        controllers_tried: tried,
        total_iterations: state.buffer.len(),
        agent_failures: state.agent_failures,
        results,
    };
    Ok(RunOutput { report, buffer: state.buffer })
}
