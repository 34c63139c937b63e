//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness. The process exits non-zero only when a
//! criterion outside `KNOWN_GAPS` fails; known gaps still print FAIL.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use loopsmith::commands;
use loopsmith::config::RunConfig;
use loopsmith::transcript::{self, Sink};
use loopsmith_core::analysis::{convergence_analysis, improvement_analysis};
use loopsmith_core::controller::{ControllerKind, ControllerSpec, Gains};
use loopsmith_core::metrics::{compute_metrics, metrics_from_signals, TrajectoryMetrics};
use loopsmith_core::orchestrator::run_full;
use loopsmith_core::plant::{PendulumParams, PlantId, PlantModel, PlantState};
use loopsmith_core::protocol::{parse_agent_json, Decision};
use loopsmith_core::scenario::{default_ladder, Scenario};
use loopsmith_core::sim::{integrate_step, run_episode, SimConfig};

/// Criteria expected to fail, with the reason recorded in the README.
const KNOWN_GAPS: [u32; 2] = [7, 9];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fixture(p: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(p)
}

fn within(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs()
}

fn simulate(id: PlantId, kind: ControllerKind, gains: &[f64], scenario: &Scenario, seed: u64) -> TrajectoryMetrics {
    let plant = PlantModel::nominal(id);
    let spec = ControllerSpec::with_gains(kind, &plant, gains).unwrap();
    compute_metrics(&run_episode(&plant, &spec, scenario, &SimConfig::default_for(id), seed).unwrap())
}

fn lqr_check(id: PlantId, q: &[f64], r: f64, want: &[f64], rel: f64) -> Outcome {
    match commands::lqr_plant(id, q, r) {
        Err(e) => outcome(false, e.to_string()),
        Ok(a) => {
            let close = a.k.iter().zip(want).all(|(g, w)| within(*g, *w, rel));
            let stable = a.closed_loop_eigenvalues.iter().all(|z| z[0] < 0.0);
            let order = a.detail.as_ref().map(|d| d.state_order.join(",")).unwrap_or_default();
            outcome(
                close && stable,
                format!("K={:.4?} want {want:?} ±{:.0}% [{order}] stable={stable}", a.k, rel * 100.0),
            )
        }
    }
}

fn c1() -> Outcome {
    lqr_check(PlantId::Pendulum, &[10.0, 0.0], 0.1, &[10.50, 0.63], 0.05)
}

fn c2() -> Outcome {
    lqr_check(PlantId::DoublePendulum, &[1.0, 1.0, 10.0, 10.0], 10.0, &[0.065, 11.0, 1.37, 2.12], 0.15)
}

fn c3() -> Outcome {
    lqr_check(PlantId::BallBeam, &[100.0, 100.0, 10.0, 10.0], 1.0, &[10.0, 15.1, 44.2, 9.9], 0.10)
}

fn c4() -> Outcome {
    // dx = -x + u, Q = R = 1: P² + 2P - 1 = 0.
    match commands::lqr_system("-1", "1", &[1.0], 1.0) {
        Err(e) => outcome(false, e.to_string()),
        Ok(a) => {
            let want = 2f64.sqrt() - 1.0;
            outcome((a.k[0] - want).abs() < 1e-9, format!("K={:.12} want {want:.12}", a.k[0]))
        }
    }
}

fn c5() -> Outcome {
    let sweep = [11.25, 12.25, 12.5, 12.75, 13.0, 14.0, 15.0, 17.5, 20.0, 25.0, 30.0, 50.0, 60.0];
    let s = Scenario::nominal("I", std::f64::consts::PI);
    let m: Vec<TrajectoryMetrics> =
        sweep.iter().map(|&k| simulate(PlantId::DcMotor, ControllerKind::P, &[k], &s, 0)).collect();
    let monotone = m.windows(2).all(|w| w[1].overshoot >= w[0].overshoot);
    let (arg, _) =
        sweep.iter().zip(&m).fold((f64::NAN, f64::INFINITY), |b, (k, x)| if x.mse < b.1 { (*k, x.mse) } else { b });
    let at = &m[3];
    let pass = monotone
        && (12.0..=13.5).contains(&arg)
        && within(at.mse, 0.9103, 0.15)
        && within(at.settling_time, 3.76, 0.20);
    outcome(
        pass,
        format!(
            "Mp monotone={monotone}, argmin MSE Kp={arg}, Kp=12.75: MSE {:.4} (0.9103 ±15%) Ts {:.2} (3.76 ±20%)",
            at.mse, at.settling_time
        ),
    )
}

fn c6() -> Outcome {
    let s = &default_ladder(PlantId::BallBeam)[0];
    let m = simulate(PlantId::BallBeam, ControllerKind::FSF, &[5.75, 9.5, 47.5, 5.75], s, 0);
    let pass = m.stable && within(m.mse, 0.0498, 0.35) && (2.0..=15.0).contains(&m.overshoot);
    outcome(pass, format!("stable={} MSE {:.4} (0.0498 ±35%) Mp {:.2}% in [2,15]", m.stable, m.mse, m.overshoot))
}

fn c7() -> Outcome {
    let bb = match commands::montecarlo(&fixture("ball_beam_mc.json"), None, None, None, None) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let pd = match commands::montecarlo(&fixture("pendulum_mc.json"), None, None, None, None) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let first = &bb.rows[0].scenario;
    let (f, l) = (bb.row(first, "FSF").unwrap(), bb.row(first, "LQR").unwrap());
    let bb_ok = f.mse < l.mse;
    let mut detail = format!(
        "ball&beam {first}: FSF {:.4} vs LQR {:.4} ({})",
        f.mse,
        l.mse,
        if bb_ok { "ok" } else { "order reversed" }
    );
    let mut pd_ok = true;
    let mut names: Vec<&str> = pd.rows.iter().map(|r| r.scenario.as_str()).collect();
    names.dedup();
    for s in names {
        let (a, b) = (pd.row(s, "FSF").unwrap(), pd.row(s, "PIDTuner").unwrap());
        let ok = a.mse < b.mse && a.settling_time < b.settling_time && a.overshoot < b.overshoot;
        pd_ok &= ok;
        detail += &format!(
            "; pendulum {s}: MSE {:.4}/{:.4} Ts {:.2}/{:.2} Mp {:.2}/{:.2}{}",
            a.mse,
            b.mse,
            a.settling_time,
            b.settling_time,
            a.overshoot,
            b.overshoot,
            if ok { "" } else { " (not dominated)" }
        );
    }
    outcome(bb_ok && pd_ok, detail)
}

fn kp(values: &[f64]) -> Vec<Gains> {
    values.iter().map(|v| [("Kp".to_string(), *v)].into_iter().collect()).collect()
}

fn c8() -> Outcome {
    let c = convergence_analysis(&kp(&[13.0, 12.5, 13.0, 12.5, 12.25])).unwrap();
    let m = |mse, ts, os| TrajectoryMetrics {
        mse,
        settling_time: ts,
        rise_time: 2.0,
        overshoot: os,
        zero_crossings: 4,
        control_zero_crossings: 4,
        control_effort: 40.0,
        ss_error: 0.0,
        stable: true,
    };
    let w = [
        m(0.9103, 3.74, 11.2451),
        m(0.9103, 3.77, 10.7139),
        m(0.9103, 3.74, 11.2451),
        m(0.9103, 3.77, 10.7139),
        m(0.9104, 3.79, 10.4325),
    ];
    let i = improvement_analysis(&w).unwrap();
    let wide = convergence_analysis(&kp(&[50.0, 30.0, 60.0])).unwrap();
    let pass = (c.max_change_percent - 3.4231).abs() <= 0.01
        && c.converged
        && (i.mse_change + 0.0112).abs() <= 0.02
        && (i.settling_time_change + 1.3369).abs() <= 0.02
        && (i.overshoot_change - 7.2263).abs() <= 0.02
        && wide.max_change_percent == 70.0;
    outcome(
        pass,
        format!(
            "convergence {:.4} converged={}, improvement ({:.4}, {:.4}, {:.4}), [50,30,60] -> {}",
            c.max_change_percent,
            c.converged,
            i.mse_change,
            i.settling_time_change,
            i.overshoot_change,
            wide.max_change_percent
        ),
    )
}

fn c9() -> Outcome {
    let out = tempfile::tempdir().unwrap();
    let r = match commands::replay(
        &fixture("case1/config.json"),
        &fixture("case1/transcript.jsonl"),
        Some(&fixture("case1/log.txt")),
        Some(out.path()),
        false,
    ) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let recs = loopsmith::plotdata::read_iterations(&r.run.dir).unwrap();
    let decisions: Vec<Decision> = recs.iter().filter_map(|x| x.decision).collect();
    let seq_ok = decisions.len() == 27
        && decisions[..26].iter().all(|d| *d == Decision::Continue)
        && decisions[26] != Decision::Continue;
    let best = r.run.report.results[0].best.as_ref().and_then(|b| b.gains.get("Kp").copied());
    let c = r.comparison.unwrap();
    let flagged = !c.metric_deviations.is_empty() && c.shared_fields_match();
    let best_mse = r.run.report.results[0].best.as_ref().map_or(f64::NAN, |b| b.metrics.mse);
    let pass = seq_ok && best == Some(12.75) && flagged;
    outcome(
        pass,
        format!(
            "{} lines, CONTINUE x26 then {:?}: {seq_ok}; best Kp={best:?} (MSE {best_mse:.6}) want 12.75; shared fields match={}, {} metric deviations flagged",
            decisions.len(),
            decisions.last(),
            c.shared_fields_match(),
            c.metric_deviations.len()
        ),
    )
}

fn c10() -> Outcome {
    let cfg = RunConfig::load(&fixture("heuristic_dc.json")).unwrap();
    let sink = Sink::default();
    let mut binding = cfg.binding(&sink).unwrap();
    let out = match run_full(cfg.run_spec(cfg.seeds[0]).unwrap(), &mut binding, &mut ()) {
        Ok(o) => o,
        Err(e) => return outcome(false, e.to_string()),
    };
    let res = &out.report.results[0];
    let Some(best) = &res.best else { return outcome(false, "no best attempt") };
    let k = best.gains.get("Kp").copied().unwrap();

    // Brute-force oracle on a 0.25 grid.
    let grid: Vec<f64> = (0..=200).map(|i| 10.0 + 0.25 * i as f64).collect();
    let (g_arg, g_mse) = grid
        .iter()
        .map(|&kp| (kp, simulate(PlantId::DcMotor, ControllerKind::P, &[kp], &res.scenario, out.report.seed).mse))
        .fold((f64::NAN, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
    let pass = best.metrics.stable && (11.0..=15.0).contains(&k) && (11.0..=15.0).contains(&g_arg);
    outcome(
        pass,
        format!(
            "{} after {} iterations; best Kp={k} MSE {:.5} stable={}; grid optimum Kp={g_arg} MSE {g_mse:.5}",
            out.report.summary, out.report.total_iterations, best.metrics.mse, best.metrics.stable
        ),
    )
}

fn c11() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    let p = PlantModel::nominal(PlantId::Pendulum);
    let run = |dt: f64, steps: usize| {
        let mut x = PlantState::from_slice(&[0.3, 0.0]);
        for _ in 0..steps {
            x = integrate_step(&p, &x, 0.0, dt);
        }
        x
    };
    let reference = run(1e-5, 100_000);
    let err = |dt: f64| {
        let x = run(dt, (1.0 / dt).round() as usize);
        ((x[0] - reference[0]).powi(2) + (x[1] - reference[1]).powi(2)).sqrt()
    };
    let errs = [err(1e-2), err(5e-3), err(2.5e-3)];
    let order = errs.windows(2).map(|w| (w[0] / w[1]).log2()).fold(f64::INFINITY, f64::min);
    pass &= order >= 3.8;
    notes.push(format!("RK4 order {order:.2}"));

    let params = PendulumParams { damping: 0.0, ..Default::default() };
    let free = PlantModel::Pendulum(params);
    let energy = |x: &PlantState| {
        0.5 * params.mass * params.length.powi(2) * x[1] * x[1]
            + params.mass * params.gravity * params.length * x[0].cos()
    };
    let mut x = PlantState::from_slice(&[2.5, 0.0]);
    let e0 = energy(&x);
    for _ in 0..10_000 {
        x = integrate_step(&free, &x, 0.0, 1e-3);
    }
    let drift = ((energy(&x) - e0) / e0).abs();
    pass &= drift < 1e-6;
    notes.push(format!("energy drift {drift:.1e}"));

    let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.01).collect();
    let e: Vec<f64> = t.iter().map(|s| (-s).exp()).collect();
    let m = metrics_from_signals(&t, &e, &vec![0.0; t.len()], false);
    let closed = (m.mse - (1.0 - (-20f64).exp()) / 20.0).abs() < 1e-3
        && (m.settling_time - 50f64.ln()).abs() < 1e-3 * 50f64.ln().max(1.0) + 0.01
        && m.zero_crossings == 0;
    pass &= closed;
    notes.push(format!("exp error MSE {:.4} Ts {:.2}", m.mse, m.settling_time));

    let mut corpus = 0;
    let mut round_trip = true;
    for case in ["case1/transcript.jsonl", "case2/transcript.jsonl"] {
        for entry in transcript::read(&fixture(case)).unwrap() {
            corpus += 1;
            match parse_agent_json(&entry.response, entry.role) {
                Ok(msg) => round_trip &= parse_agent_json(&msg.to_json(), entry.role).as_ref() == Ok(&msg),
                Err(_) => round_trip = false,
            }
        }
    }
    pass &= round_trip;
    notes.push(format!("protocol round-trip over {corpus} messages: {round_trip}"));

    let report = || {
        let cfg = RunConfig::load(&fixture("heuristic_dc.json")).unwrap();
        let mut binding = cfg.binding(&Sink::default()).unwrap();
        let out = run_full(cfg.run_spec(cfg.seeds[0]).unwrap(), &mut binding, &mut ()).unwrap();
        serde_json::to_string(&out.report).unwrap()
    };
    let same = report() == report();
    pass &= same;
    notes.push(format!("identical seeded reports: {same}"));

    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    type Check = fn() -> Outcome;
    let criteria: [(u32, &str, Duration, Check); 11] = [
        (1, "LQR pendulum gains", Duration::from_secs(1), c1),
        (2, "LQR double pendulum gains", Duration::from_secs(1), c2),
        (3, "LQR ball & beam gains", Duration::from_secs(1), c3),
        (4, "scalar Riccati oracle", Duration::from_secs(1), c4),
        (5, "DC motor sweep ordering", Duration::from_secs(10), c5),
        (6, "ball & beam published gains", Duration::from_secs(5), c6),
        (7, "Monte Carlo orderings", Duration::from_secs(120), c7),
        (8, "analyzer golden values", Duration::from_secs(1), c8),
        (9, "Case I replay", Duration::from_secs(60), c9),
        (10, "end-to-end heuristic run", Duration::from_secs(60), c10),
        (11, "property suites", Duration::from_secs(60), c11),
    ];
    let mut unexpected = 0;
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let mut o = check();
        let took = start.elapsed();
        if took > limit {
            o.pass = false;
            o.detail += &format!("; runtime {:.2}s over {:.0}s limit", took.as_secs_f64(), limit.as_secs_f64());
        }
        let gap = if !o.pass && KNOWN_GAPS.contains(&id) { " [known gap]" } else { "" };
        println!(
            "{} criterion {id:>2} {name} ({:.2}s){gap}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            o.detail
        );
        if !o.pass && gap.is_empty() {
            unexpected += 1;
        }
    }
    if unexpected > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
