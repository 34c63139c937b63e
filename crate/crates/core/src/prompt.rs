//! Prompt rendering for the six roles.
//!
//! Fixed wording lives in `templates/<role>.{system,user}.txt` with
//! `{name}` placeholders; everything data-dependent is rendered here.
//! Numbers use four decimals unless a section calls for fewer.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::analysis::{Convergence, Improvement, ParameterStatistics};
use crate::buffer::IterationRecord;
use crate::context::AgentContext;
use crate::controller::{ControllerKind, Gains, Ranges};
use crate::heuristics::recommended_strategy;
use crate::metrics::{meets_targets, TrajectoryMetrics};
use crate::protocol::Role;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

const ARROW: &str = " → ";

fn templates(role: Role) -> (&'static str, &'static str) {
    match role {
        Role::Selector => {
            (include_str!("../templates/selector.system.txt"), include_str!("../templates/selector.user.txt"))
        }
        Role::Scenarist => {
            (include_str!("../templates/scenarist.system.txt"), include_str!("../templates/scenarist.user.txt"))
        }
        Role::Actor => (include_str!("../templates/actor.system.txt"), include_str!("../templates/actor.user.txt")),
        Role::Critic => (include_str!("../templates/critic.system.txt"), include_str!("../templates/critic.user.txt")),
        Role::Terminator => {
            (include_str!("../templates/terminator.system.txt"), include_str!("../templates/terminator.user.txt"))
        }
        Role::Juror => (include_str!("../templates/juror.system.txt"), include_str!("../templates/juror.user.txt")),
    }
}

/// Substitutes `{name}` placeholders; braces around anything else are kept verbatim.
pub fn fill(template: &str, vars: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let name_len = after.bytes().take_while(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || *b == b'_').count();
        let value = (name_len > 0 && after.as_bytes().get(name_len) == Some(&b'}'))
            .then(|| vars.iter().find(|(k, _)| *k == &after[..name_len]))
            .flatten();
        match value {
            Some((_, v)) => {
                out.push_str(v);
                rest = &after[name_len + 1..];
            }
            None => {
                out.push('{');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out.trim_end().to_string()
}

/// Renders the system and user text for `ctx.role`.
pub fn render_prompt(ctx: &AgentContext) -> Prompt {
    let (sys, user) = templates(ctx.role);
    let vars = match ctx.role {
        Role::Selector => selector_vars(ctx),
        Role::Scenarist => scenarist_vars(ctx),
        Role::Actor => actor_vars(ctx),
        Role::Critic => critic_vars(ctx),
        Role::Terminator => terminator_vars(ctx),
        Role::Juror => juror_vars(ctx),
    };
    Prompt { system: fill(sys, &vars), user: fill(user, &vars) }
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

fn f2(x: f64) -> String {
    format!("{x:.2}")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "Yes"
    } else {
        "No"
    }
}

fn chain<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(ARROW)
}

fn gains_inline(g: &Gains, sep: &str) -> String {
    g.iter().map(|(k, v)| format!("{k}{sep}{}", f4(*v))).collect::<Vec<_>>().join(", ")
}

/// `{Kp: 35.0}` style, shortest round-trip digits.
fn gains_brief(g: &Gains) -> String {
    let body: Vec<String> = g.iter().map(|(k, v)| format!("{k}: {v:?}")).collect();
    format!("{{{}}}", body.join(", "))
}

fn ranges_brief(r: &Ranges) -> String {
    r.iter().map(|(k, g)| format!("{k}: [{:?}, {:?}]", g.min, g.max)).collect::<Vec<_>>().join(", ")
}

fn ranges_lines(r: &Ranges, fmt: fn(f64) -> String) -> String {
    r.iter().map(|(k, g)| format!("- {k}: [{}, {}]", fmt(g.min), fmt(g.max))).collect::<Vec<_>>().join("\n")
}

fn ranges_json(r: &Ranges) -> String {
    let body: Vec<String> = r.iter().map(|(k, g)| format!("  \"{k}\": [{:?}, {:?}]", g.min, g.max)).collect();
    format!("{{\n{}\n}}", body.join(",\n"))
}

fn round_to(x: f64, dp: i32) -> f64 {
    let s = libm::pow(10.0, dp as f64);
    libm::round(x * s) / s
}

fn num(x: f64, dp: i32) -> Value {
    if x.is_finite() {
        serde_json::Number::from_f64(round_to(x, dp)).map_or(Value::Null, Value::Number)
    } else if x > 0.0 {
        Value::String("inf".into())
    } else if x < 0.0 {
        Value::String("-inf".into())
    } else {
        Value::String("nan".into())
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).unwrap_or_default()
}

fn common_vars(ctx: &AgentContext) -> Vec<(&'static str, String)> {
    let info = ctx.plant.info();
    let mut v = alloc::vec![
        ("title", info.title.to_string()),
        ("phrase", info.phrase.to_string()),
        ("description", info.description.to_string()),
        ("state_count", ctx.plant.dim().to_string()),
        ("state_labels", info.state_labels.to_string()),
        ("state_list", ctx.plant.state_names().join(", ")),
        ("input_label", info.input_label.to_string()),
        ("iteration", ctx.iteration.to_string()),
        ("max_iterations", ctx.max_iterations.to_string()),
        ("min_iterations", ctx.min_iterations.to_string()),
    ];
    if let Some(k) = ctx.controller {
        v.push(("controller", k.as_str().to_string()));
    }
    v
}

fn selector_vars(ctx: &AgentContext) -> Vec<(&'static str, String)> {
    let mut v = common_vars(ctx);
    let list: Vec<String> = ctx
        .candidates
        .iter()
        .map(|(k, r)| format!("- {}: {} ({})", k.as_str(), k.long_name(), ranges_brief(r)))
        .collect();
    v.push(("controller_list", list.join("\n")));
    v.push(("target_mse", format!("{:?}", ctx.targets.mse)));
    v.push(("target_ts", format!("{:?}", ctx.targets.settling_time)));
    v.push(("target_os", format!("{:?}", ctx.targets.overshoot)));
    v.push(("character", if ctx.plant.dim() <= 3 { "simplicity" } else { "complexity" }.to_string()));
    v
}

fn scenarist_vars(ctx: &AgentContext) -> Vec<(&'static str, String)> {
    let mut v = common_vars(ctx);
    if let Some((k, g)) = &ctx.selected {
        v.push(("controller", k.as_str().to_string()));
        v.push(("parameters", gains_brief(g)));
    } else {
        v.push(("controller", "none".into()));
        v.push(("parameters", "{}".into()));
    }
    v.push(("level", (ctx.scenario_level + 1).to_string()));
    v.push(("levels", ctx.scenario_levels.max(ctx.scenario_level + 1).to_string()));
    let focus = match ctx.scenario_level {
        0 => "nominal conditions for initial evaluation",
        1 => "measurement noise and actuator disturbances for intermediate evaluation",
        _ => "parametric uncertainty in the plant for advanced evaluation",
    };
    v.push(("level_focus", focus.to_string()));
    v
}

fn controller_details(ctx: &AgentContext, kind: ControllerKind) -> String {
    let names = ctx.plant.state_names();
    let mut s = String::new();
    if kind == ControllerKind::FSF {
        let n = ctx.gain_names.len();
        let law = if n <= 3 {
            (1..=n).map(|j| format!("K{j}*x{j}")).collect::<Vec<_>>().join(" - ")
        } else {
            format!("K1*x1 - K2*x2 - ... - K{n}*x{n}")
        };
        let _ = writeln!(s, "FULL-STATE FEEDBACK DETAILS:");
        let _ = writeln!(s, "- Control gains: {}", ctx.gain_names.join(", "));
        let _ = write!(s, "- Control law: u = -{law}");
        for (j, idx) in ctx.plant.feedback_indices().iter().enumerate() {
            let _ = write!(s, "\n- K{} controls feedback from {}", j + 1, names[*idx]);
        }
        return s;
    }
    let _ = writeln!(s, "{} CONTROLLER DETAILS:", kind.as_str());
    let _ = write!(s, "- Output feedback controller using {}", names[ctx.plant.regulated_index()]);
    for g in &ctx.gain_names {
        let what = match g.as_str() {
            "Kp" => "Proportional gain (response speed vs overshoot)",
            "Ki" => "Integral gain (steady-state error removal vs overshoot)",
            "Kd" => "Derivative gain (damping vs noise sensitivity)",
            _ => "Gain",
        };
        let _ = write!(s, "\n- {g}: {what}");
    }
    s
}

fn actor_json_format(names: &[String]) -> String {
    let mut s = String::from("{\n");
    for n in names {
        let _ = writeln!(s, "    \"{n}\": value,");
    }
    s.push_str("    \"reasoning\": \"Detailed explanation of parameter choices\"\n}");
    s
}

fn gain_series(records: &[IterationRecord], name: &str) -> String {
    chain(records, |r| r.gains.get(name).map_or_else(|| "n/a".into(), |v| f4(*v)))
}

fn actor_history(ctx: &AgentContext) -> String {
    let h = &ctx.history;
    if h.is_empty() {
        return String::new();
    }
    let mut s = format!("RECENT PERFORMANCE HISTORY ({} attempts):\nParameter Trends:\n", h.len());
    for n in &ctx.gain_names {
        let _ = writeln!(s, "- {n}: {}", gain_series(h, n));
    }
    s.push_str("\nPerformance Trends:\n");
    let _ = writeln!(s, "- Mse: {}", chain(h, |r| f4(r.metrics.mse)));
    let _ = writeln!(s, "- Settling Time: {}", chain(h, |r| f2(r.metrics.settling_time)));
    let _ = writeln!(s, "- Overshoot: {}", chain(h, |r| f4(r.metrics.overshoot)));
    let _ = writeln!(s, "- Zero Crossings: {}", chain(h, |r| r.metrics.zero_crossings.to_string()));
    let _ = writeln!(s, "- Control Zero Crossings: {}", chain(h, |r| r.metrics.control_zero_crossings.to_string()));
    let _ = writeln!(s, "- Control Effort: {}", chain(h, |r| f4(r.metrics.control_effort)));
    let _ = writeln!(s, "- Stable: {}\n", chain(h, |r| yes_no(r.metrics.stable).to_string()));
    s
}

fn actor_feedback(ctx: &AgentContext) -> String {
    let Some(fb) = &ctx.feedback else { return String::new() };
    let mut s = format!(
        "LATEST FEEDBACK:\n- Strategy: {}\n- Analysis: {}\n- Suggestions:\n",
        fb.strategy.as_str(),
        fb.result_analysis
    );
    for sug in &fb.suggested_improvements {
        let _ = writeln!(s, "  • {sug}");
    }
    s.push('\n');
    s
}

fn actor_best(ctx: &AgentContext) -> String {
    if ctx.best.is_empty() {
        return String::new();
    }
    let mut s = String::from("BEST PERFORMING ATTEMPTS:\n");
    for (i, r) in ctx.best.iter().enumerate() {
        let _ = writeln!(s, "Best #{} (Iteration #{}):", i + 1, r.iteration);
        let _ = writeln!(s, "- Parameters: {}", gains_inline(&r.gains, "="));
        let _ = writeln!(
            s,
            "- Performance: MSE={}, Settling Time={}s, Stable={}\n",
            f4(r.metrics.mse),
            f2(r.metrics.settling_time),
            yes_no(r.metrics.stable)
        );
    }
    s
}

fn actor_vars(ctx: &AgentContext) -> Vec<(&'static str, String)> {
    let mut v = common_vars(ctx);
    let kind = ctx.controller.unwrap_or(ControllerKind::P);
    v.push(("controller_details", controller_details(ctx, kind)));
    v.push(("constraints", ranges_lines(&ctx.ranges, f4)));
    v.push(("history", actor_history(ctx)));
    v.push(("feedback", actor_feedback(ctx)));
    v.push(("best", actor_best(ctx)));
    v.push(("json_format", actor_json_format(&ctx.gain_names)));
    v
}

fn critic_trend(ctx: &AgentContext) -> String {
    let h = &ctx.history;
    if h.is_empty() {
        return "No previous attempts available.".into();
    }
    let mut s = format!("TREND FROM PREVIOUS {} RESULTS:\nParameters:\n", h.len());
    for n in &ctx.gain_names {
        let _ = writeln!(s, "{n}: {}", gain_series(h, n));
    }
    s.push_str("\nMetrics:\n");
    type Column = (&'static str, fn(&TrajectoryMetrics) -> f64);
    let rows: [Column; 10] = [
        ("mse", |m| m.mse),
        ("rmse", |m| libm::sqrt(m.mse)),
        ("settling_time", |m| m.settling_time),
        ("overshoot", |m| m.overshoot),
        ("stable", |m| if m.stable { 1.0 } else { 0.0 }),
        ("rise_time", |m| m.rise_time),
        ("zero_crossings", |m| m.zero_crossings as f64),
        ("control_effort", |m| m.control_effort),
        ("control_zero_crossings", |m| m.control_zero_crossings as f64),
        ("ss_error", |m| m.ss_error),
    ];
    let lines: Vec<String> =
        rows.iter().map(|(name, f)| format!("{name}: {}", chain(h, |r| f4(f(&r.metrics))))).collect();
    s.push_str(&lines.join("\n"));
    s
}

fn critic_best(ctx: &AgentContext) -> String {
    let Some(b) = ctx.best.first() else { return "No best performance yet.".into() };
    let m = &b.metrics;
    format!(
        "BEST PERFORMANCE SO FAR:\nParameters:\n{}\n\nMetrics:\n- Mean Squared Error: {}\n- Settling Time: {}s\n- Maximum Overshoot: {} percent\n- Zero-Crossings: {}\n- Control Effort: {}\n- System Stable: {}",
        gains_inline(&b.gains, " = "),
        f4(m.mse),
        f2(m.settling_time),
        f2(m.overshoot),
        m.zero_crossings,
        f4(m.control_effort),
        yes_no(m.stable)
    )
}

fn critic_vars(ctx: &AgentContext) -> Vec<(&'static str, String)> {
    let mut v = common_vars(ctx);
    v.push(("ranges", ranges_lines(&ctx.ranges, f2)));
    let (params, metrics) = match &ctx.current {
        Some(c) => {
            let m = &c.metrics;
            let t = &ctx.targets;
            let metrics = format!(
                "- Mean Squared Error: {} (Target: {} or less)\n- Settling Time: {}s (Target: {}s or less)\n- Maximum Overshoot: {} percent (Target: {} percent or less)\n- Zero-Crossings: {}\n- Control Signal Zero-Crossings: {}\n- Control Effort: {}\n- System Stable: {}",
                f4(m.mse),
                f4(t.mse),
                f2(m.settling_time),
                f2(t.settling_time),
                f2(m.overshoot),
                f4(t.overshoot),
                m.zero_crossings,
                m.control_zero_crossings,
                f4(m.control_effort),
                yes_no(m.stable)
            );
            (gains_inline(&c.gains, " = "), metrics)
        }
        None => ("none".into(), "No metrics available.".into()),
    };
    v.push(("current_parameters", params));
    v.push(("trend", critic_trend(ctx)));
    v.push(("best", critic_best(ctx)));
    v.push(("metrics", metrics));
    v.push(("strategy", recommended_strategy(ctx).as_str().to_string()));
    v.push(("explore_percent", format!("{}", libm::round(ctx.policy.explore_fraction * 100.0))));
    v
}

fn rounded_improvement(i: &Improvement) -> Value {
    let mut m = Map::new();
    m.insert("mse_change".into(), num(i.mse_change, 4));
    m.insert("settling_time_change".into(), num(i.settling_time_change, 4));
    m.insert("overshoot_change".into(), num(i.overshoot_change, 4));
    m.insert("iterations_analyzed".into(), Value::from(i.iterations_analyzed));
    Value::Object(m)
}

fn rounded_convergence(c: &Convergence) -> Value {
    let mut changes = Map::new();
    for (k, v) in c.parameter_changes.iter() {
        changes.insert(k.into(), num(*v, 4));
    }
    let mut m = Map::new();
    m.insert("parameter_changes".into(), Value::Object(changes));
    m.insert("max_change_percent".into(), num(c.max_change_percent, 4));
    m.insert("converged".into(), Value::Bool(c.converged));
    m.insert("iterations_analyzed".into(), Value::from(c.iterations_analyzed));
    Value::Object(m)
}

fn terminator_trend(ctx: &AgentContext) -> String {
    let h = &ctx.history;
    if h.len() < 2 {
        return String::new();
    }
    let mut s = format!("TREND FROM PREVIOUS {} RESULTS:\nParameters:\n", h.len());
    for n in &ctx.gain_names {
        let _ = writeln!(s, "{n}: {}", gain_series(h, n));
    }
    s.push_str("\nMetrics:\n");
    let _ = writeln!(s, "mse: {}", chain(h, |r| f4(r.metrics.mse)));
    let _ = writeln!(s, "settling_time: {}", chain(h, |r| f2(r.metrics.settling_time)));
    let _ = writeln!(s, "overshoot: {}", chain(h, |r| f4(r.metrics.overshoot)));
    let _ = writeln!(s, "stable: {}", chain(h, |r| f4(if r.metrics.stable { 1.0 } else { 0.0 })));
    let _ = writeln!(s, "zero_crossings: {}", chain(h, |r| f4(r.metrics.zero_crossings as f64)));
    let _ = writeln!(s, "control_effort: {}", chain(h, |r| f4(r.metrics.control_effort)));
    let _ = writeln!(s, "control_zero_crossings: {}\n", chain(h, |r| f4(r.metrics.control_zero_crossings as f64)));
    s
}

fn terminator_analyses(ctx: &AgentContext) -> String {
    let mut s = String::new();
    if let Some(i) = &ctx.improvement {
        let _ = writeln!(s, "IMPROVEMENT ANALYSIS:\n{}", pretty(&rounded_improvement(i)));
    }
    if let Some(c) = &ctx.convergence {
        let _ = writeln!(s, "PARAMETER CONVERGENCE ANALYSIS:\n{}", pretty(&rounded_convergence(c)));
    }
    s
}

fn terminator_vars(ctx: &AgentContext) -> Vec<(&'static str, String)> {
    let mut v = common_vars(ctx);
    let t = &ctx.targets;
    let p = &ctx.policy;
    v.push(("target_mse", format!("{:.6}", t.mse)));
    v.push(("target_ts", f2(t.settling_time)));
    v.push(("target_os", f4(t.overshoot)));
    v.push(("criteria_mse", format!("{:?}", t.mse)));
    v.push(("criteria_ts", format!("{:?}", t.settling_time)));
    v.push(("criteria_os", format!("{}", t.overshoot)));
    let metrics = match &ctx.current {
        Some(c) => {
            let m = &c.metrics;
            let ok = meets_targets(m, t);
            let tag = |b: bool| if b { "SUCCESS" } else { "NOT YET" };
            format!(
                "- MSE: {:.6} ({})\n- Settling time: {}s ({})\n- Overshoot: {} ({})\n- System stable: {}\n- Zero crossings: {} (Lower is better - indicates fewer oscillations)\n- Control effort: {} (Lower is better - indicates efficient control)\n- Control zero crossings: {} (Lower is better - indicates smoother control)",
                m.mse,
                tag(ok.mse),
                f2(m.settling_time),
                tag(ok.settling_time),
                f4(m.overshoot),
                tag(ok.overshoot),
                yes_no(m.stable),
                m.zero_crossings,
                f4(m.control_effort),
                m.control_zero_crossings
            )
        }
        None => "No metrics available.".into(),
    };
    v.push(("metrics", metrics));
    let strategy = ctx.current.as_ref().and_then(|c| c.strategy()).map_or("UNKNOWN", |s| s.as_str());
    v.push(("strategy", strategy.to_string()));
    v.push(("trend", terminator_trend(ctx)));
    v.push(("analyses", terminator_analyses(ctx)));
    let noisy = ctx.noisy();
    if noisy {
        v.push(("oscillation_gate", format!("control_zero_crossings <= {}", p.noisy_czc_max)));
        v.push(("oscillation_fail", format!("control_zero_crossings > {}", p.noisy_czc_max)));
        v.push((
            "noise_note",
            "- This scenario adds measurement noise, so the error signal crosses zero often regardless of tuning; judge oscillation by control_zero_crossings instead of zero_crossings\n".into(),
        ));
    } else {
        v.push(("oscillation_gate", format!("zero_crossings <= {}", p.zc_max)));
        v.push(("oscillation_fail", format!("zero_crossings > {}", p.zc_max)));
        v.push(("noise_note", String::new()));
    }
    v.push(("zc_max", p.zc_max.to_string()));
    v.push(("czc_max", p.noisy_czc_max.to_string()));
    v.push(("success_change", format!("{}", p.success_change)));
    v.push(("redesign_change", format!("{}", p.redesign_change)));
    v.push(("stall_improvement", format!("{}", p.stall_improvement)));
    v
}

fn rounded_statistics(s: &ParameterStatistics) -> Value {
    let mut gains = Map::new();
    for (k, g) in s.gains.iter() {
        let mut m = Map::new();
        m.insert("min".into(), num(g.min, 4));
        m.insert("max".into(), num(g.max, 4));
        m.insert("mean".into(), num(g.mean, 4));
        m.insert("std".into(), num(g.std, 4));
        gains.insert(k.into(), Value::Object(m));
    }
    let mut m = Map::new();
    m.insert("parameters".into(), Value::Object(gains));
    m.insert("samples".into(), Value::from(s.samples));
    m.insert("stable_samples".into(), Value::from(s.stable_samples));
    m.insert("stability_rate".into(), num(s.stability_rate, 4));
    Value::Object(m)
}

fn juror_best(r: &IterationRecord) -> Value {
    let mut params = Map::new();
    for (k, v) in r.gains.iter() {
        params.insert(k.into(), num(*v, 4));
    }
    let m = &r.metrics;
    let mut metrics = Map::new();
    metrics.insert("mse".into(), num(m.mse, 4));
    metrics.insert("settling_time".into(), num(m.settling_time, 2));
    metrics.insert("rise_time".into(), num(m.rise_time, 2));
    metrics.insert("overshoot".into(), num(m.overshoot, 4));
    metrics.insert("stable".into(), Value::Bool(m.stable));
    let mut o = Map::new();
    o.insert("params".into(), Value::Object(params));
    o.insert("metrics".into(), Value::Object(metrics));
    Value::Object(o)
}

fn juror_vars(ctx: &AgentContext) -> Vec<(&'static str, String)> {
    let mut v = common_vars(ctx);
    v.push(("ranges", ranges_json(&ctx.ranges)));
    v.push(("global_ranges", ranges_json(&ctx.global_ranges)));
    v.push((
        "statistics",
        ctx.statistics.as_ref().map_or_else(|| "No attempts recorded.".into(), |s| pretty(&rounded_statistics(s))),
    ));
    v.push(("best", ctx.best.first().map_or_else(|| "No attempts recorded.".into(), |b| pretty(&juror_best(b)))));
    v.push(("total_iterations", ctx.round_iterations.to_string()));
    v.push(("reconsiderations", ctx.reconsiderations.to_string()));
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{default_ranges, ControllerKind};
    use crate::metrics::Targets;
    use crate::plant::{PlantId, PlantModel};
    use crate::protocol::{CriticFeedback, Strategy};
    use alloc::vec;

    fn metrics(mse: f64, ts: f64, os: f64, zc: u32) -> TrajectoryMetrics {
        TrajectoryMetrics {
            mse,
            settling_time: ts,
            rise_time: 1.89,
            overshoot: os,
            zero_crossings: zc,
            control_zero_crossings: zc,
            control_effort: 9060.5072,
            ss_error: 0.02,
            stable: true,
        }
    }

    fn record(iteration: usize, kp: f64, m: TrajectoryMetrics) -> IterationRecord {
        IterationRecord {
            seq: iteration,
            stage: 0,
            round: 0,
            controller: ControllerKind::P,
            scenario: "I".into(),
            scenario_level: 0,
            iteration,
            max_iterations: 30,
            gains: [("Kp".into(), kp)].into_iter().collect(),
            metrics: m,
            critic: None,
            verdict: None,
            decision: None,
            clamp_warnings: vec![],
            agent_errors: vec![],
            wall_time: None,
        }
    }

    fn dc_ctx(role: Role, iteration: usize) -> AgentContext {
        let plant = PlantModel::nominal(PlantId::DcMotor);
        let mut ctx = AgentContext::new(role, plant, 7, Targets { mse: 0.9, settling_time: 3.0, overshoot: 10.0 });
        ctx.controller = Some(ControllerKind::P);
        ctx.gain_names = ControllerKind::P.gain_names(&ctx.plant);
        ctx.ranges = default_ranges(ControllerKind::P, PlantId::DcMotor).unwrap();
        ctx.global_ranges = ctx.ranges.clone();
        ctx.iteration = iteration;
        ctx.max_iterations = 30;
        ctx.min_iterations = 6;
        ctx
    }

    #[test]
    fn placeholders_and_literal_braces() {
        let out = fill("a {x} {\n  \"k\": {y}} {unknown} {Caps}", &[("x", "1".into()), ("y", "2".into())]);
        assert_eq!(out, "a 1 {\n  \"k\": 2} {unknown} {Caps}");
    }

    #[test]
    fn actor_second_iteration_shows_one_attempt() {
        let mut ctx = dc_ctx(Role::Actor, 2);
        let first = record(1, 50.0, metrics(0.9203, 4.78, 18.248, 8));
        ctx.history = vec![first.clone()];
        ctx.best = vec![first];
        ctx.feedback = Some(CriticFeedback {
            strategy: Strategy::Explore,
            result_analysis: "Underdamped.".into(),
            suggested_improvements: vec!["Test a lower Kp value, such as 30.00.".into()],
        });
        let p = render_prompt(&ctx);
        assert!(p.system.starts_with(
            "You are the ACTOR in a control system optimization framework. Your task is to optimize a P controller"
        ));
        assert!(p.system.contains("You are currently at iteration 2 of 30."));
        assert!(p.user.contains("RECENT PERFORMANCE HISTORY (1 attempts):"));
        assert!(p.user.contains("- Kp: 50.0000\n"));
        assert!(p.user.contains("- Kp: [10.0000, 60.0000]"));
        assert!(p.user.contains("Best #1 (Iteration #1):\n- Parameters: Kp=50.0000\n- Performance: MSE=0.9203, Settling Time=4.78s, Stable=Yes"));
        assert!(p.user.contains("  • Test a lower Kp value"));
        assert!(p.user.contains("\"Kp\": value,"));
        assert!(p.user.contains("Output feedback controller using theta"));
    }

    #[test]
    fn actor_history_uses_arrow_chains() {
        let mut ctx = dc_ctx(Role::Actor, 3);
        ctx.history =
            vec![record(1, 50.0, metrics(0.9203, 4.78, 18.248, 8)), record(2, 30.0, metrics(0.9173, 4.22, 17.7074, 6))];
        let p = render_prompt(&ctx);
        assert!(p.user.contains("- Kp: 50.0000 → 30.0000"));
        assert!(p.user.contains("- Settling Time: 4.78 → 4.22"));
        assert!(p.user.contains("- Stable: Yes → Yes"));
    }

    #[test]
    fn critic_first_iteration() {
        let mut ctx = dc_ctx(Role::Critic, 1);
        ctx.current = Some(record(1, 50.0, metrics(0.9203, 4.78, 18.248, 8)));
        let p = render_prompt(&ctx);
        assert!(p.user.contains("No previous attempts available."));
        assert!(p.user.contains("No best performance yet."));
        assert!(p.user.contains("the recommended strategy is to EXPLORE"));
        assert!(p.user.contains("- Kp: [10.00, 60.00]"));
        assert!(p.user.contains("Kp = 50.0000"));
        assert!(p.user.contains("- Maximum Overshoot: 18.25 percent (Target: 10.0000 percent or less)"));
        assert!(p.user.contains("first 30% of iterations"));
    }

    #[test]
    fn fsf_details_name_each_state() {
        let plant = PlantModel::nominal(PlantId::BallBeam);
        let mut ctx =
            AgentContext::new(Role::Actor, plant, 1, Targets { mse: 0.2, settling_time: 6.0, overshoot: 5.0 });
        ctx.controller = Some(ControllerKind::FSF);
        ctx.gain_names = ControllerKind::FSF.gain_names(&ctx.plant);
        ctx.ranges = default_ranges(ControllerKind::FSF, PlantId::BallBeam).unwrap();
        ctx.iteration = 1;
        ctx.max_iterations = 20;
        let p = render_prompt(&ctx);
        assert!(p.user.contains("- Control law: u = -K1*x1 - K2*x2 - ... - K4*x4"));
        assert!(p.user.contains("- K3 controls feedback from alpha"));
        assert!(p.system.contains("- State variables: r, dr, alpha, dalpha"));
        assert!(!p.user.contains("RECENT PERFORMANCE HISTORY"));
    }

    #[test]
    fn terminator_shows_trend_analyses_and_criteria() {
        let mut ctx = dc_ctx(Role::Terminator, 3);
        let recs = vec![
            record(1, 50.0, metrics(0.920269, 4.78, 18.2480, 8)),
            record(2, 30.0, metrics(0.917260, 4.22, 17.7074, 6)),
            record(3, 60.0, metrics(0.922464, 5.50, 18.2861, 9)),
        ];
        let ms: Vec<_> = recs.iter().map(|r| r.metrics).collect();
        let gs: Vec<_> = recs.iter().map(|r| r.gains.clone()).collect();
        ctx.improvement = Some(crate::analysis::improvement_analysis(&ms).unwrap());
        ctx.convergence = Some(crate::analysis::convergence_analysis(&gs).unwrap());
        ctx.current = recs.last().cloned();
        ctx.history = recs;
        let p = render_prompt(&ctx);
        assert!(p.user.contains("TREND FROM PREVIOUS 3 RESULTS:"));
        assert!(p.user.contains("Kp: 50.0000 → 30.0000 → 60.0000"));
        assert!(p.user.contains("\"mse_change\": -0.2385"));
        assert!(p.user.contains("\"max_change_percent\": 70.0"));
        assert!(p.user.contains("- MSE target: 0.900000"));
        assert!(p.user.contains("- MSE: 0.922464 (NOT YET)"));
        assert!(p.user.contains("If current_iteration < 6, always CONTINUE"));
        assert!(p.user.contains("(MSE <= 0.9, settling_time <= 3.0, overshoot <= 10)"));
        assert!(p.user.contains("The critic has suggested to UNKNOWN"));
        assert!(p.system.ends_with("You are currently at iteration 3 of 30."));
    }

    #[test]
    fn juror_ranges_render_compactly() {
        let plant = PlantModel::nominal(PlantId::BallBeam);
        let mut ctx =
            AgentContext::new(Role::Juror, plant, 1, Targets { mse: 0.2, settling_time: 6.0, overshoot: 5.0 });
        ctx.controller = Some(ControllerKind::FSF);
        ctx.ranges = default_ranges(ControllerKind::FSF, PlantId::BallBeam).unwrap();
        let p = render_prompt(&ctx);
        assert!(p.user.contains("{\n  \"K1\": [0.01, 12.495],\n  \"K2\": [0.01, 19.495],"));
        assert!(p.user.contains("a FSF controller"));
        assert!(p.user.contains("\"new_range\": {parameter_name: [min_value, max_value], ...} or null,"));
    }

    #[test]
    fn selector_lists_candidates() {
        let mut ctx = dc_ctx(Role::Selector, 0);
        ctx.candidates =
            ControllerKind::ALL.iter().map(|k| (*k, default_ranges(*k, PlantId::DcMotor).unwrap())).collect();
        let p = render_prompt(&ctx);
        assert!(p.user.contains("- P: Proportional controller (Kp: [10.0, 60.0])"));
        assert!(p.user.contains(
            "- FSF: Full-State Feedback controller (K1: [0.01, 10.0], K2: [0.01, 100.0], K3: [0.01, 200.0])"
        ));
        assert!(p.user.contains("- Target MSE: 0.9\n- Target Settling Time: 3.0s"));
        assert!(p.user.contains("\"controller_type\": \"P|PI|PD|PID|FSF\","));
    }

    #[test]
    fn rendering_is_deterministic_and_complete() {
        for role in Role::ALL {
            let mut ctx = dc_ctx(role, 2);
            ctx.current = Some(record(2, 30.0, metrics(0.9173, 4.22, 17.7074, 6)));
            ctx.history = vec![record(1, 50.0, metrics(0.9203, 4.78, 18.248, 8))];
            let a = render_prompt(&ctx);
            assert_eq!(a, render_prompt(&ctx));
            for text in [&a.system, &a.user] {
                let leftover = text.match_indices('{').any(|(i, _)| {
                    let rest = &text[i + 1..];
                    let n = rest.bytes().take_while(|b| b.is_ascii_lowercase() || *b == b'_').count();
                    n > 0 && rest.as_bytes().get(n) == Some(&b'}')
                });
                assert!(!leftover, "{role} prompt has an unfilled placeholder:\n{text}");
            }
        }
    }
}
