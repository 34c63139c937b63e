//! Step-response metrics of a regulation run.
//!
//! All band tests are relative to the initial error magnitude, because every
//! run regulates to zero. When the initial error is (numerically) zero the
//! reference magnitude falls back to 1, which makes the settling band 0.02
//! in absolute units.

use serde::{Deserialize, Serialize};

use crate::sim::Trajectory;

pub const SETTLING_BAND: f64 = 0.02;
pub const RISE_FRACTION: f64 = 0.1;
pub const STEADY_STATE_FRACTION: f64 = 0.05;
pub const STABILITY_FRACTION: f64 = 0.1;

/// Below this initial-error magnitude the bands use absolute units.
const ZERO_E0: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMetrics {
    #[serde(with = "float_or_inf")]
    pub mse: f64,
    #[serde(with = "float_or_inf")]
    pub settling_time: f64,
    #[serde(with = "float_or_inf")]
    pub rise_time: f64,
    #[serde(with = "float_or_inf")]
    pub overshoot: f64,
    pub zero_crossings: u32,
    pub control_zero_crossings: u32,
    #[serde(with = "float_or_inf")]
    pub control_effort: f64,
    #[serde(with = "float_or_inf")]
    pub ss_error: f64,
    pub stable: bool,
}

/// Target values the terminator compares against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Targets {
    pub mse: f64,
    pub settling_time: f64,
    pub overshoot: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetCheck {
    pub mse: bool,
    pub settling_time: bool,
    pub overshoot: bool,
}

impl TargetCheck {
    pub fn all(&self) -> bool {
        self.mse && self.settling_time && self.overshoot
    }
}

/// Serde adapter writing non-finite floats as `"inf"`, `"-inf"` or `"nan"`.
pub mod float_or_inf {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw<'a> {
        Num(f64),
        Str(&'a str),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Str("inf") => Ok(f64::INFINITY),
            Raw::Str("-inf") => Ok(f64::NEG_INFINITY),
            Raw::Str("nan") => Ok(f64::NAN),
            Raw::Str(other) => Err(D::Error::custom(alloc::format!("expected a number or inf, got '{other}'"))),
        }
    }
}

fn sign_changes(xs: &[f64]) -> u32 {
    let mut last = 0.0f64;
    let mut count = 0;
    for &x in xs {
        if x == 0.0 || x.is_nan() {
            continue;
        }
        if last != 0.0 && (x > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = x;
    }
    count
}

/// Computes all metrics from the sampled error and control signals.
pub fn compute_metrics(traj: &Trajectory) -> TrajectoryMetrics {
    metrics_from_signals(&traj.time, &traj.error, &traj.control, traj.diverged)
}

/// Same as [`compute_metrics`] on raw sample vectors of equal length.
pub fn metrics_from_signals(t: &[f64], e: &[f64], u: &[f64], diverged: bool) -> TrajectoryMetrics {
    assert!(!e.is_empty() && e.len() == t.len() && u.len() == t.len(), "signals must be non-empty and aligned");
    let n = e.len();
    let e0 = e[0];
    let scale = if e0.abs() < ZERO_E0 { 1.0 } else { e0.abs() };
    let dir = if e0 < 0.0 { -1.0 } else { 1.0 };

    let mse = e.iter().map(|v| v * v).sum::<f64>() / n as f64;

    let band = SETTLING_BAND * scale;
    let settling_time = match e.iter().rposition(|v| !(v.abs() <= band)) {
        None => t[0],
        Some(i) if i + 1 == n => f64::INFINITY,
        Some(i) => crossing(t[i], t[i + 1], e[i].abs(), e[i + 1].abs(), band),
    };

    let thr = RISE_FRACTION * scale;
    let rise_time = match e.iter().position(|v| v.abs() <= thr) {
        None => f64::INFINITY,
        Some(0) => t[0],
        Some(i) => crossing(t[i - 1], t[i], e[i - 1].abs(), e[i].abs(), thr),
    };

    let deepest = e.iter().fold(f64::INFINITY, |m, v| m.min(v * dir));
    let overshoot = 100.0 * (-deepest).max(0.0) / scale;

    let control_effort =
        t.windows(2).zip(u.windows(2)).map(|(tw, uw)| 0.5 * (uw[0].abs() + uw[1].abs()) * (tw[1] - tw[0])).sum::<f64>();

    let tail = libm::round(STEADY_STATE_FRACTION * n as f64).max(1.0) as usize;
    let ss_error = e[n - tail..].iter().map(|v| v.abs()).sum::<f64>() / tail as f64;

    let stable = !diverged && ss_error.is_finite() && ss_error <= STABILITY_FRACTION * e0.abs().max(SETTLING_BAND);

    TrajectoryMetrics {
        mse,
        settling_time,
        rise_time,
        overshoot,
        zero_crossings: sign_changes(e),
        control_zero_crossings: sign_changes(u),
        control_effort,
        ss_error,
        stable,
    }
}

/// Time at which `|e|` crosses `level` between two samples, by linear interpolation.
fn crossing(t0: f64, t1: f64, a0: f64, a1: f64, level: f64) -> f64 {
    if !(a0 - a1).is_normal() || !(a0 - a1 > 0.0) {
        return t1;
    }
    let frac = ((a0 - level) / (a0 - a1)).clamp(0.0, 1.0);
    t0 + frac * (t1 - t0)
}

/// Per-metric comparison against targets; an unstable run meets nothing.
pub fn meets_targets(m: &TrajectoryMetrics, targets: &Targets) -> TargetCheck {
    TargetCheck {
        mse: m.stable && m.mse <= targets.mse,
        settling_time: m.stable && m.settling_time <= targets.settling_time,
        overshoot: m.stable && m.overshoot <= targets.overshoot,
    }
}

/// Unit-weight sum of metric/target ratios; `+inf` for unstable runs.
pub fn composite_score(m: &TrajectoryMetrics, targets: &Targets) -> f64 {
    if !m.stable {
        return f64::INFINITY;
    }
    m.mse / targets.mse + m.settling_time / targets.settling_time + m.overshoot / targets.overshoot
}
