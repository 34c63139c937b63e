//! Where agent replies come from.
//!
//! A backend turns a rendered prompt into raw reply text; the orchestrator
//! parses and validates it. Network-backed implementations live in the
//! host crate; the rule-based and replay backends are here.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::context::AgentContext;
use crate::error::Error;
use crate::heuristics;
use crate::prompt::Prompt;
use crate::protocol::Role;

pub trait AgentBackend {
    /// Raw reply text for `prompt`; `ctx` is the data the prompt was rendered from.
    fn respond(&mut self, ctx: &AgentContext, prompt: &Prompt) -> Result<String, Error>;
}

/// Answers with the deterministic rule-based agents.
#[derive(Clone, Copy, Debug, Default)]
pub struct HeuristicBackend;

impl AgentBackend for HeuristicBackend {
    fn respond(&mut self, ctx: &AgentContext, _prompt: &Prompt) -> Result<String, Error> {
        heuristics::respond(ctx)
            .map(|m| m.to_json())
            .ok_or_else(|| Error::Config(format!("the {} context lacks the data its rule needs", ctx.role)))
    }
}

/// Plays back recorded replies, one queue per role.
#[derive(Clone, Debug, Default)]
pub struct ReplayBackend {
    queues: BTreeMap<Role, VecDeque<String>>,
}

impl ReplayBackend {
    pub fn new(entries: impl IntoIterator<Item = (Role, String)>) -> Self {
        let mut queues: BTreeMap<Role, VecDeque<String>> = BTreeMap::new();
        for (role, reply) in entries {
            queues.entry(role).or_default().push_back(reply);
        }
        ReplayBackend { queues }
    }

    pub fn remaining(&self, role: Role) -> usize {
        self.queues.get(&role).map_or(0, |q| q.len())
    }
}

impl AgentBackend for ReplayBackend {
    fn respond(&mut self, ctx: &AgentContext, _prompt: &Prompt) -> Result<String, Error> {
        self.queues
            .get_mut(&ctx.role)
            .and_then(|q| q.pop_front())
            .ok_or_else(|| Error::Replay(format!("transcript has no more {} replies", ctx.role)))
    }
}

/// Role-to-backend assignment; every role falls back to the default backend.
pub struct AgentBinding {
    default: Box<dyn AgentBackend>,
    overrides: Vec<(Role, Box<dyn AgentBackend>)>,
}

impl AgentBinding {
    pub fn new(default: Box<dyn AgentBackend>) -> Self {
        AgentBinding { default, overrides: Vec::new() }
    }

    pub fn heuristic() -> Self {
        Self::new(Box::new(HeuristicBackend))
    }

    pub fn with(mut self, role: Role, backend: Box<dyn AgentBackend>) -> Self {
        self.overrides.retain(|(r, _)| *r != role);
        self.overrides.push((role, backend));
        self
    }

    pub fn respond(&mut self, ctx: &AgentContext, prompt: &Prompt) -> Result<String, Error> {
        match self.overrides.iter_mut().find(|(r, _)| *r == ctx.role) {
            Some((_, b)) => b.respond(ctx, prompt),
            None => self.default.respond(ctx, prompt),
        }
    }
}

impl core::fmt::Debug for AgentBinding {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let roles: Vec<&str> = self.overrides.iter().map(|(r, _)| r.as_str()).collect();
        f.debug_struct("AgentBinding").field("overridden_roles", &roles).finish()
    }
}
