//! Deterministic rule-based agents.
//!
//! Each role is a pure function of its [`AgentContext`]; randomness comes
//! from ChaCha streams keyed by the run seed and the iteration, so a run is
//! reproducible end to end without a language model.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::IterationRecord;
use crate::context::AgentContext;
use crate::controller::{GainRange, Gains, Ranges};
use crate::metrics::meets_targets;
use crate::protocol::{
    ActorProposal, AgentMessage, CriticFeedback, Decision, JurorDecision, JurorVerdict, Role, SelectorChoice, Strategy,
    TerminatorVerdict,
};
use crate::scenario::Scenario;

/// Thresholds behind the rule-based agents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeuristicPolicy {
    /// Share of the iteration budget spent exploring.
    pub explore_fraction: f64,
    /// Early exploration samples within this fraction of the width from a bound.
    pub boundary_band: f64,
    /// Initial exploit step as a fraction of the range width; halves twice over a round.
    pub exploit_step: f64,
    pub zc_max: u32,
    /// Control zero-crossing cap that replaces the error gate under measurement noise.
    pub noisy_czc_max: u32,
    /// Largest gain movement, in percent, still counted as converged for success.
    pub success_change: f64,
    /// Gain movement, in percent, above which the search counts as unconverged.
    pub redesign_change: f64,
    /// MSE improvement, in percent, below which progress counts as stalled.
    pub stall_improvement: f64,
    /// Juror boundary proximity as a fraction of the range width.
    pub juror_boundary: f64,
    /// Juror reconsiders below this stability rate.
    pub juror_stability: f64,
    /// Width of a reconsidered range relative to the old one.
    pub juror_shrink: f64,
}

impl Default for HeuristicPolicy {
    fn default() -> Self {
        HeuristicPolicy {
            explore_fraction: 0.3,
            boundary_band: 0.15,
            exploit_step: 0.05,
            zc_max: 5,
            noisy_czc_max: 10,
            success_change: 5.0,
            redesign_change: 20.0,
            stall_improvement: 5.0,
            juror_boundary: 0.10,
            juror_stability: 0.30,
            juror_shrink: 0.5,
        }
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

fn rng_for(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (a << 20) ^ b);
    rng
}

/// The strategy the critic is steered towards at this point of the round.
pub fn recommended_strategy(ctx: &AgentContext) -> Strategy {
    if ctx.iteration as f64 <= ctx.policy.explore_fraction * ctx.max_iterations as f64 {
        return Strategy::Explore;
    }
    let stable_best =
        ctx.best.first().is_some_and(|b| b.metrics.stable) || ctx.current.as_ref().is_some_and(|c| c.metrics.stable);
    if stable_best {
        Strategy::Exploit
    } else {
        Strategy::Explore
    }
}

fn in_boundary_phase(ctx: &AgentContext) -> bool {
    ctx.iteration as f64 <= libm::ceil(ctx.policy.explore_fraction * ctx.max_iterations as f64)
}

/// Low-discrepancy point in the box; early points hug the bounds.
fn explore_point(ctx: &AgentContext) -> Gains {
    let mut rot = rng_for(ctx.seed, 1, 0, 0);
    let k = (ctx.iteration + ctx.round * ctx.max_iterations.max(1)) as u64;
    let boundary = in_boundary_phase(ctx);
    let band = ctx.policy.boundary_band;
    let mut g = Gains::new();
    for (j, name) in ctx.gain_names.iter().enumerate() {
        let r = ctx.ranges.get(name).copied().unwrap_or(GainRange::new(0.0, 1.0));
        let shift: f64 = rot.random();
        let h = radical_inverse(k, PRIMES[j % PRIMES.len()]) + shift;
        let h = h - libm::floor(h);
        let x = if boundary {
            if h < 0.5 {
                r.min + (h / 0.5) * band * r.width()
            } else {
                r.max - ((h - 0.5) / 0.5) * band * r.width()
            }
        } else {
            r.min + h * r.width()
        };
        g.insert(name.as_str(), r.clamp(x));
    }
    g
}

/// Exploit step as a fraction of the width at the current iteration.
pub fn exploit_fraction(policy: &HeuristicPolicy, iteration: usize, max_iterations: usize) -> f64 {
    let stage = (3 * iteration.saturating_sub(1)) / max_iterations.max(1);
    policy.exploit_step * libm::pow(0.5, stage.min(2) as f64)
}

fn exploit_point(ctx: &AgentContext, best: &IterationRecord) -> Gains {
    let frac = exploit_fraction(&ctx.policy, ctx.iteration, ctx.max_iterations);
    let mut rng = rng_for(ctx.seed, 2, ctx.round as u64, ctx.iteration as u64);
    let mut g = Gains::new();
    for name in &ctx.gain_names {
        let r = ctx.ranges.get(name).copied().unwrap_or(GainRange::new(f64::MIN, f64::MAX));
        let base = best.gains.get(name).copied().unwrap_or(r.mid());
        let step = rng.random_range(-1.0..=1.0) * frac * r.width();
        g.insert(name.as_str(), r.clamp(base + step));
    }
    g
}

pub fn heuristic_actor(ctx: &AgentContext) -> ActorProposal {
    let strategy = ctx.feedback.as_ref().map_or(Strategy::Explore, |f| f.strategy);
    let best = ctx.best.first();
    match (strategy, best) {
        (Strategy::Exploit, Some(b)) => ActorProposal {
            gains: exploit_point(ctx, b),
            reasoning: format!(
                "Refining around the best attempt so far (iteration {}) with steps of at most {:.1}% of each range width.",
                b.iteration,
                100.0 * exploit_fraction(&ctx.policy, ctx.iteration, ctx.max_iterations)
            ),
        },
        _ => ActorProposal {
            gains: explore_point(ctx),
            reasoning: if in_boundary_phase(ctx) {
                "Sampling near the range boundaries to map the extremes of the permissible region early.".into()
            } else {
                "Sampling the permissible box with a low-discrepancy sequence to cover regions not yet tested.".into()
            },
        },
    }
}

fn fmt_gains(g: &Gains) -> String {
    g.iter().map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(", ")
}

pub fn heuristic_critic(ctx: &AgentContext) -> CriticFeedback {
    let strategy = recommended_strategy(ctx);
    let Some(cur) = &ctx.current else {
        return CriticFeedback {
            strategy,
            result_analysis: "No result to analyze.".into(),
            suggested_improvements: Vec::new(),
        };
    };
    let m = &cur.metrics;
    let t = &ctx.targets;
    let ok = meets_targets(m, t);
    let mut analysis = format!(
        "Iteration {} of {}: MSE {:.4} (target {:.4}), settling time {:.2}s (target {:.2}s), overshoot {:.2}% (target {:.2}%), {} error zero crossings; the run is {}.",
        ctx.iteration,
        ctx.max_iterations,
        m.mse,
        t.mse,
        m.settling_time,
        t.settling_time,
        m.overshoot,
        t.overshoot,
        m.zero_crossings,
        if m.stable { "stable" } else { "unstable" }
    );
    if ok.all() {
        analysis.push_str(" All targets are met.");
    } else {
        let missed: Vec<&str> = [(ok.mse, "MSE"), (ok.settling_time, "settling time"), (ok.overshoot, "overshoot")]
            .iter()
            .filter(|(o, _)| !o)
            .map(|(_, n)| *n)
            .collect();
        analysis.push_str(&format!(" Still missing: {}.", missed.join(", ")));
    }
    let suggestions = match strategy {
        Strategy::Explore => ctx
            .ranges
            .iter()
            .map(|(k, r)| {
                format!("Sample {k} across [{:.2}, {:.2}], including values near both boundaries.", r.min, r.max)
            })
            .collect(),
        Strategy::Exploit => {
            let best =
                ctx.best.first().filter(|b| b.metrics.stable && (!m.stable || b.metrics.mse <= m.mse)).unwrap_or(cur);
            let frac = exploit_fraction(&ctx.policy, ctx.iteration + 1, ctx.max_iterations);
            best.gains
                .iter()
                .map(|(k, v)| {
                    let w = ctx.ranges.get(k).map_or(0.0, |r| r.width());
                    format!("Refine {k} around {v:.4} in steps of at most {:.4}.", frac * w)
                })
                .collect()
        }
    };
    CriticFeedback { strategy, result_analysis: analysis, suggested_improvements: suggestions }
}

pub fn heuristic_terminator(ctx: &AgentContext) -> TerminatorVerdict {
    let p = &ctx.policy;
    let verdict =
        |decision, reasoning: String, rec: &str| TerminatorVerdict { decision, reasoning, recommendations: rec.into() };
    if ctx.iteration < ctx.min_iterations {
        return verdict(
            Decision::Continue,
            format!(
                "Iteration {} is below the minimum of {} iterations before termination.",
                ctx.iteration, ctx.min_iterations
            ),
            "Keep following the critic's strategy.",
        );
    }
    let Some(cur) = &ctx.current else {
        return verdict(Decision::Continue, "No result available for this iteration.".into(), "Retry the iteration.");
    };
    match cur.strategy() {
        Some(Strategy::Exploit) => {}
        Some(Strategy::Explore) => {
            return verdict(
                Decision::Continue,
                "The critic asked for exploration; termination would be premature.".into(),
                "Continue exploring the permissible ranges.",
            )
        }
        None => return verdict(Decision::Continue, "No critic strategy is available.".into(), "Continue."),
    }
    let m = &cur.metrics;
    let targets_met = meets_targets(m, &ctx.targets).all();
    let (gate_ok, gate_text) = if ctx.noisy() {
        (
            m.control_zero_crossings <= p.noisy_czc_max,
            format!("control zero crossings {} (limit {})", m.control_zero_crossings, p.noisy_czc_max),
        )
    } else {
        (m.zero_crossings <= p.zc_max, format!("zero crossings {} (limit {})", m.zero_crossings, p.zc_max))
    };
    let change = ctx.convergence.as_ref().map_or(f64::INFINITY, |c| c.max_change_percent);
    let mse_gain = ctx.improvement.as_ref().map_or(0.0, |i| i.mse_change);
    if targets_met && gate_ok && change <= p.success_change {
        return verdict(
            Decision::TerminateSuccess,
            format!("All targets are met, {gate_text} passes and the gains moved at most {change:.2}% over the recent window."),
            "",
        );
    }
    let unsatisfied = !targets_met || !gate_ok || change > p.redesign_change;
    if unsatisfied && mse_gain < p.stall_improvement {
        return verdict(
            Decision::TerminateRedesign,
            format!(
                "Targets met: {}; {gate_text}; gain movement {change:.2}%. The MSE improved by only {mse_gain:.4}% over the recent window, so progress has stalled.",
                if targets_met { "yes" } else { "no" }
            ),
            "Reconsider the search ranges or the controller structure.",
        );
    }
    verdict(
        Decision::Continue,
        format!(
            "Targets met: {}; {gate_text}; gain movement {change:.2}%; MSE improvement {mse_gain:.4}%.",
            if targets_met { "yes" } else { "no" }
        ),
        "Keep refining around the best attempt.",
    )
}

/// New search box centred on `best`, `shrink` times the old width, clipped to `global`.
pub fn recentred_ranges(best: &Gains, ranges: &Ranges, global: &Ranges, shrink: f64) -> Ranges {
    let mut out = Ranges::new();
    for (name, r) in ranges.iter() {
        let v = best.get(name).copied().unwrap_or(r.mid());
        let half = 0.5 * shrink * r.width();
        let g = global.get(name).copied().unwrap_or(GainRange::new(f64::NEG_INFINITY, f64::INFINITY));
        let mut lo = (v - half).max(g.min);
        let mut hi = (v + half).min(g.max);
        if !(lo < hi) {
            lo = lo.min(v);
            hi = lo + half.max(f64::EPSILON * v.abs().max(1.0));
        }
        out.insert(name, GainRange::new(lo, hi));
    }
    out
}

pub fn heuristic_juror(ctx: &AgentContext) -> JurorVerdict {
    let p = &ctx.policy;
    let explore =
        |reason: String| JurorVerdict { decision: JurorDecision::ExploreFurther, new_range: None, reasoning: reason };
    let Some(best) = ctx.best.first() else {
        return explore("No attempts recorded yet; keep exploring the current ranges.".into());
    };
    let near: Vec<&str> = ctx
        .ranges
        .iter()
        .filter(|(name, r)| {
            best.gains.get(name).is_some_and(|v| (v - r.min).min(r.max - v) <= p.juror_boundary * r.width())
        })
        .map(|(name, _)| name)
        .collect();
    let rate = ctx.statistics.as_ref().map_or(if best.metrics.stable { 1.0 } else { 0.0 }, |s| s.stability_rate);
    let low_stability = rate < p.juror_stability;
    if near.is_empty() && !low_stability {
        return explore(format!(
            "The best gains ({}) sit inside the ranges and {:.0}% of attempts were stable; the current box is still promising.",
            fmt_gains(&best.gains),
            100.0 * rate
        ));
    }
    let new_range = recentred_ranges(&best.gains, &ctx.ranges, &ctx.global_ranges, p.juror_shrink);
    let mut why = Vec::new();
    if !near.is_empty() {
        why.push(format!("the best gains lie near the boundary for {}", near.join(", ")));
    }
    if low_stability {
        why.push(format!("only {:.0}% of attempts were stable", 100.0 * rate));
    }
    JurorVerdict {
        decision: JurorDecision::ReconsiderRange,
        new_range: Some(new_range),
        reasoning: format!(
            "Recentring the search on the best gains ({}) at {:.0}% of the old width because {}.",
            fmt_gains(&best.gains),
            100.0 * p.juror_shrink,
            why.join(" and ")
        ),
    }
}

pub fn heuristic_selector(ctx: &AgentContext) -> Option<SelectorChoice> {
    let (kind, ranges) = ctx.candidates.first()?;
    Some(SelectorChoice {
        controller_type: *kind,
        parameters: ranges.iter().map(|(k, r)| (k.to_string(), r.mid())).collect(),
        reasoning: format!(
            "{} is the simplest remaining candidate; starting from the midpoint of each range.",
            kind.long_name()
        ),
    })
}

pub fn heuristic_scenarist(ctx: &AgentContext) -> Option<Scenario> {
    let mut s = ctx.scenario.clone()?;
    s.reasoning =
        Some(format!("Ladder level {} of {}, used as configured.", ctx.scenario_level + 1, ctx.scenario_levels));
    Some(s)
}

/// Rule-based reply for `ctx.role`, or `None` when the context lacks what the role needs.
pub fn respond(ctx: &AgentContext) -> Option<AgentMessage> {
    Some(match ctx.role {
        Role::Selector => AgentMessage::Selector(heuristic_selector(ctx)?),
        Role::Scenarist => AgentMessage::Scenarist(heuristic_scenarist(ctx)?),
        Role::Actor => AgentMessage::Actor(heuristic_actor(ctx)),
        Role::Critic => AgentMessage::Critic(heuristic_critic(ctx)),
        Role::Terminator => AgentMessage::Terminator(heuristic_terminator(ctx)),
        Role::Juror => AgentMessage::Juror(heuristic_juror(ctx)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{convergence_analysis, improvement_analysis, parameter_statistics};
    use crate::controller::{default_ranges, ControllerKind};
    use crate::metrics::{Targets, TrajectoryMetrics};
    use crate::plant::{PlantId, PlantModel};
    use crate::protocol::parse_agent_json;
    use alloc::vec;
    use proptest::{prop_assert, prop_assume, proptest};

    fn met(mse: f64, ts: f64, os: f64, zc: u32, stable: bool) -> TrajectoryMetrics {
        TrajectoryMetrics {
            mse,
            settling_time: ts,
            rise_time: 2.0,
            overshoot: os,
            zero_crossings: zc,
            control_zero_crossings: zc,
            control_effort: 4000.0,
            ss_error: 0.0,
            stable,
        }
    }

    fn rec(
        iteration: usize,
        gains: &[(&str, f64)],
        m: TrajectoryMetrics,
        strategy: Option<Strategy>,
    ) -> IterationRecord {
        IterationRecord {
            seq: iteration,
            stage: 0,
            round: 0,
            controller: ControllerKind::P,
            scenario: "I".into(),
            scenario_level: 0,
            iteration,
            max_iterations: 30,
            gains: gains.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            metrics: m,
            critic: strategy.map(|s| CriticFeedback {
                strategy: s,
                result_analysis: String::new(),
                suggested_improvements: vec![],
            }),
            verdict: None,
            decision: None,
            clamp_warnings: vec![],
            agent_errors: vec![],
            wall_time: None,
        }
    }

    fn dc(role: Role, iteration: usize, seed: u64) -> AgentContext {
        let plant = PlantModel::nominal(PlantId::DcMotor);
        let mut ctx = AgentContext::new(role, plant, seed, Targets { mse: 0.9, settling_time: 3.0, overshoot: 10.0 });
        ctx.controller = Some(ControllerKind::P);
        ctx.gain_names = vec!["Kp".into()];
        ctx.ranges = default_ranges(ControllerKind::P, PlantId::DcMotor).unwrap();
        ctx.global_ranges = ctx.ranges.clone();
        ctx.iteration = iteration;
        ctx.max_iterations = 30;
        ctx.min_iterations = 6;
        ctx
    }

    #[test]
    fn first_proposal_hugs_a_boundary() {
        for seed in 0..50 {
            let kp = *heuristic_actor(&dc(Role::Actor, 1, seed)).gains.get("Kp").unwrap();
            assert!((10.0..=60.0).contains(&kp));
            assert!(kp <= 10.0 + 7.5 || kp >= 60.0 - 7.5, "seed {seed}: Kp={kp}");
        }
    }

    #[test]
    fn exploit_stays_within_five_percent_of_width() {
        for seed in 0..50 {
            let mut ctx = dc(Role::Actor, 12, seed);
            ctx.feedback = Some(CriticFeedback {
                strategy: Strategy::Exploit,
                result_analysis: String::new(),
                suggested_improvements: vec![],
            });
            ctx.best = vec![rec(10, &[("Kp", 12.5)], met(0.91, 3.8, 10.7, 4, true), None)];
            for it in 1..=30 {
                ctx.iteration = it;
                let kp = *heuristic_actor(&ctx).gains.get("Kp").unwrap();
                assert!((kp - 12.5).abs() <= 2.5 + 1e-12, "Kp={kp}");
                assert!(kp >= 10.0);
            }
        }
    }

    #[test]
    fn actor_is_deterministic_in_the_seed() {
        let seq = |seed| (1..=30).map(|i| heuristic_actor(&dc(Role::Actor, i, seed)).gains).collect::<Vec<_>>();
        assert_eq!(seq(3), seq(3));
        assert_ne!(seq(3), seq(4));
    }

    #[test]
    fn critic_rules() {
        let mut ctx = dc(Role::Critic, 1, 0);
        ctx.current = Some(rec(1, &[("Kp", 50.0)], met(0.92, 4.78, 18.2, 8, true), None));
        assert_eq!(heuristic_critic(&ctx).strategy, Strategy::Explore);
        ctx.iteration = 25;
        ctx.best = vec![rec(14, &[("Kp", 12.75)], met(0.9103, 3.76, 10.98, 4, true), None)];
        assert_eq!(heuristic_critic(&ctx).strategy, Strategy::Exploit);
        ctx.best = vec![rec(14, &[("Kp", 12.75)], met(0.9103, 3.76, 10.98, 4, false), None)];
        ctx.current = Some(rec(25, &[("Kp", 50.0)], met(0.92, 4.78, 18.2, 8, false), None));
        assert_eq!(heuristic_critic(&ctx).strategy, Strategy::Explore);
    }

    fn terminator_at(window: &[(f64, f64, f64, f64, u32)], strategy: Strategy, iteration: usize) -> TerminatorVerdict {
        let mut ctx = dc(Role::Terminator, iteration, 0);
        let recs: Vec<_> = window
            .iter()
            .enumerate()
            .map(|(i, (kp, mse, ts, os, zc))| {
                rec(iteration + 1 - window.len() + i, &[("Kp", *kp)], met(*mse, *ts, *os, *zc, true), Some(strategy))
            })
            .collect();
        let ms: Vec<_> = recs.iter().map(|r| r.metrics).collect();
        let gs: Vec<_> = recs.iter().map(|r| r.gains.clone()).collect();
        ctx.improvement = improvement_analysis(&ms).ok();
        ctx.convergence = convergence_analysis(&gs).ok();
        ctx.current = recs.last().cloned();
        ctx.history = recs;
        heuristic_terminator(&ctx)
    }

    #[test]
    fn terminator_first_iteration_continues() {
        let v = terminator_at(&[(50.0, 0.9203, 4.78, 18.25, 8)], Strategy::Explore, 1);
        assert_eq!(v.decision, Decision::Continue);
    }

    #[test]
    fn terminator_redesigns_on_the_final_logged_window() {
        let w = [
            (13.0, 0.9103, 3.74, 11.2451, 4),
            (12.5, 0.9103, 3.77, 10.7139, 4),
            (13.0, 0.9103, 3.74, 11.2451, 4),
            (12.5, 0.9103, 3.77, 10.7139, 4),
            (12.25, 0.9104, 3.79, 10.4325, 4),
        ];
        let v = terminator_at(&w, Strategy::Exploit, 27);
        assert_eq!(v.decision, Decision::TerminateRedesign);
    }

    #[test]
    fn terminator_succeeds_when_everything_holds() {
        let w = [(12.0, 0.5, 2.0, 5.0, 3), (12.1, 0.5, 2.0, 5.0, 3), (12.2, 0.5, 2.0, 5.0, 3)];
        assert_eq!(terminator_at(&w, Strategy::Exploit, 10).decision, Decision::TerminateSuccess);
        assert_eq!(terminator_at(&w, Strategy::Explore, 10).decision, Decision::Continue);
        assert_eq!(terminator_at(&w, Strategy::Exploit, 5).decision, Decision::Continue);
    }

    fn bb_juror(best: &[f64], stable_flags: &[bool]) -> JurorVerdict {
        let plant = PlantModel::nominal(PlantId::BallBeam);
        let mut ctx =
            AgentContext::new(Role::Juror, plant, 0, Targets { mse: 0.2, settling_time: 6.0, overshoot: 5.0 });
        ctx.controller = Some(ControllerKind::FSF);
        ctx.ranges = default_ranges(ControllerKind::FSF, PlantId::BallBeam).unwrap();
        ctx.global_ranges = ctx.ranges.clone();
        let names = ["K1", "K2", "K3", "K4"];
        let g: Vec<(&str, f64)> = names.iter().copied().zip(best.iter().copied()).collect();
        let b = rec(19, &g, met(0.06, 5.4, 19.7, 6, true), None);
        let gains = b.gains.clone();
        let samples: Vec<(&Gains, bool)> = stable_flags.iter().map(|s| (&gains, *s)).collect();
        ctx.statistics = parameter_statistics(&samples).ok();
        ctx.best = vec![b];
        ctx.round_iterations = stable_flags.len();
        heuristic_juror(&ctx)
    }

    #[test]
    fn juror_recentres_on_a_weak_region() {
        let v =
            bb_juror(&[6.0, 6.0, 45.0, 4.5], &[true, false, false, false, false, false, false, false, false, false]);
        assert_eq!(v.decision, JurorDecision::ReconsiderRange);
        v.validate().unwrap();
        let r = v.new_range.unwrap();
        let k3 = r.get("K3").unwrap();
        assert!(k3.contains(45.0) && k3.min >= 0.01 && k3.max <= 69.995 && k3.width() < 69.985);
    }

    #[test]
    fn juror_keeps_a_healthy_centred_search() {
        let v = bb_juror(&[6.2525, 9.7525, 35.0025, 6.7525], &[true; 10]);
        assert_eq!(v.decision, JurorDecision::ExploreFurther);
        assert!(v.new_range.is_none());
    }

    #[test]
    fn heuristic_replies_survive_the_wire() {
        let mut ctx = dc(Role::Actor, 3, 1);
        ctx.candidates = vec![(ControllerKind::P, ctx.ranges.clone())];
        ctx.scenario = Some(Scenario::nominal("I", core::f64::consts::PI));
        ctx.scenario_levels = 3;
        ctx.current = Some(rec(3, &[("Kp", 20.0)], met(0.91, 3.4, 15.7, 5, true), Some(Strategy::Explore)));
        ctx.best = ctx.current.iter().cloned().collect();
        for role in Role::ALL {
            ctx.role = role;
            let msg = respond(&ctx).unwrap();
            assert_eq!(parse_agent_json(&msg.to_json(), role).unwrap(), msg);
        }
    }

    proptest! {
        #[test]
        fn recentred_ranges_contain_best(v in 0.01f64..69.995, lo in 0.01f64..30.0, w in 1.0f64..40.0) {
            let hi = (lo + w).min(69.995);
            prop_assume!(hi > lo);
            let v = v.clamp(lo, hi);
            let best: Gains = [("K".to_string(), v)].into_iter().collect();
            let cur: Ranges = [("K".to_string(), GainRange::new(lo, hi))].into_iter().collect();
            let global: Ranges = [("K".to_string(), GainRange::new(0.01, 69.995))].into_iter().collect();
            let r = recentred_ranges(&best, &cur, &global, 0.5);
            let g = r.get("K").unwrap();
            prop_assert!(g.min < g.max && g.min <= v && v <= g.max);
            prop_assert!(g.min >= 0.01 && g.max <= 69.995);
        }
    }
}
