//! The shared buffer: every evaluated proposal of a run, in order.
//!
//! Records are grouped by *stage* (one controller on one ladder level) and
//! by *round* within a stage (a round restarts after each range
//! reconsideration). Prompt windows and best-attempt lists are views over
//! the current stage; juror statistics cover the current round only.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::analysis::ANALYSIS_WINDOW;
use crate::controller::{ControllerKind, Gains};
use crate::metrics::{composite_score, Targets, TrajectoryMetrics};
use crate::protocol::{ClampWarning, CriticFeedback, Decision, Strategy, TerminatorVerdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Position in the whole run, from 1.
    pub seq: usize,
    pub stage: usize,
    pub round: usize,
    pub controller: ControllerKind,
    pub scenario: String,
    pub scenario_level: usize,
    /// Iteration within the round, from 1.
    pub iteration: usize,
    pub max_iterations: usize,
    pub gains: Gains,
    pub metrics: TrajectoryMetrics,
    #[serde(default)]
    pub critic: Option<CriticFeedback>,
    #[serde(default)]
    pub verdict: Option<TerminatorVerdict>,
    /// Decision acted upon; differs from the verdict when the minimum
    /// iteration count forced a CONTINUE.
    #[serde(default)]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clamp_warnings: Vec<ClampWarning>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub agent_errors: Vec<String>,
    /// Wall-clock seconds spent on the iteration, filled in by hosts with a clock.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl IterationRecord {
    pub fn strategy(&self) -> Option<Strategy> {
        self.critic.as_ref().map(|c| c.strategy)
    }
}

/// Ranking used for best attempts. Stable runs always rank above unstable ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BestBy {
    #[default]
    Mse,
    Composite,
}

impl BestBy {
    /// Orders `a` before `b` when it is the better attempt; ties keep the earlier record first.
    pub fn compare(self, a: &IterationRecord, b: &IterationRecord, targets: &Targets) -> Ordering {
        let key = |r: &IterationRecord| {
            let s = match self {
                BestBy::Mse => r.metrics.mse,
                BestBy::Composite => composite_score(&r.metrics, targets),
            };
            (!r.metrics.stable, if s.is_nan() { f64::INFINITY } else { s })
        };
        let (ua, sa) = key(a);
        let (ub, sb) = key(b);
        ua.cmp(&ub).then(sa.total_cmp(&sb)).then(a.seq.cmp(&b.seq))
    }
}

/// Append-only store of iteration records.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SharedBuffer {
    records: Vec<IterationRecord>,
}

impl SharedBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rec: IterationRecord) {
        if let Some(last) = self.records.last() {
            assert!(rec.seq > last.seq, "buffer sequence numbers must increase");
            if last.stage == rec.stage && last.round == rec.round {
                assert!(rec.iteration > last.iteration, "iteration index must increase within a round");
            }
        }
        self.records.push(rec);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn last_mut(&mut self) -> Option<&mut IterationRecord> {
        self.records.last_mut()
    }

    pub fn stage(&self, stage: usize) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(move |r| r.stage == stage)
    }

    pub fn round(&self, stage: usize, round: usize) -> impl Iterator<Item = &IterationRecord> {
        self.stage(stage).filter(move |r| r.round == round)
    }

    /// The last `n` records of `stage` with `seq < before`.
    pub fn recent(&self, stage: usize, before: usize, n: usize) -> Vec<&IterationRecord> {
        let all: Vec<&IterationRecord> = self.stage(stage).filter(|r| r.seq < before).collect();
        all[all.len().saturating_sub(n)..].to_vec()
    }

    /// Top `k` attempts of `stage` with `seq < before`, best first.
    pub fn best(&self, stage: usize, before: usize, k: usize, by: BestBy, targets: &Targets) -> Vec<&IterationRecord> {
        let mut all: Vec<&IterationRecord> = self.stage(stage).filter(|r| r.seq < before).collect();
        all.sort_by(|a, b| by.compare(a, b, targets));
        all.truncate(k);
        all
    }

    /// The most recent critic feedback of `stage` with `seq < before`.
    pub fn latest_feedback(&self, stage: usize, before: usize) -> Option<&CriticFeedback> {
        self.stage(stage).filter(|r| r.seq < before).filter_map(|r| r.critic.as_ref()).last()
    }
}

/// Number of earlier records shown to the actor and critic at `iteration`.
///
/// Grows with the iteration count, but a round that starts after a range
/// change still sees the last attempt of the previous round.
pub fn history_len(iteration: usize) -> usize {
    iteration.saturating_sub(1).clamp(1, ANALYSIS_WINDOW)
}
