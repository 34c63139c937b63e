//! One-line iteration summaries:
//! `#14/30 | Type:P | Kp:12.750 | MSE:0.9103 | Ts:3.76 | ... | isStb:True`.

use std::fmt::Write as _;

use loopsmith_core::buffer::IterationRecord;
use loopsmith_core::controller::ControllerKind;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Decimal places for gains: the scalar loops log three, state feedback two.
pub fn gain_decimals(kind: ControllerKind) -> usize {
    if kind == ControllerKind::FSF {
        2
    } else {
        3
    }
}

fn num(x: f64, dp: usize) -> String {
    if x.is_finite() {
        format!("{x:.dp$}")
    } else if x > 0.0 {
        "inf".into()
    } else if x < 0.0 {
        "-inf".into()
    } else {
        "nan".into()
    }
}

pub fn render(rec: &IterationRecord) -> String {
    let m = &rec.metrics;
    let dp = gain_decimals(rec.controller);
    let mut s = format!("#{}/{} | Type:{}", rec.iteration, rec.max_iterations, rec.controller);
    for (name, v) in rec.gains.iter() {
        let _ = write!(s, " | {name}:{}", num(*v, dp));
    }
    let _ = write!(
        s,
        " | MSE:{} | Ts:{} | Tr:{} | %OS:{} | ZC:{} | CZC:{} | CE:{} | e_ss:{} | isStb:{}",
        num(m.mse, 4),
        num(m.settling_time, 2),
        num(m.rise_time, 2),
        num(m.overshoot, 2),
        m.zero_crossings,
        m.control_zero_crossings,
        num(m.control_effort, 2),
        num(m.ss_error, 2),
        if m.stable { "True" } else { "False" },
    );
    s
}

/// A parsed log line; fields keep their printed text so comparisons can be exact.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogLine {
    pub iteration: usize,
    pub max_iterations: usize,
    pub controller: String,
    pub gains: Vec<(String, String)>,
    pub metrics: Vec<(String, String)>,
}

const METRIC_KEYS: [&str; 9] = ["MSE", "Ts", "Tr", "%OS", "ZC", "CZC", "CE", "e_ss", "isStb"];

pub fn parse(line: &str) -> Result<LogLine> {
    let bad = |why: &str| HarnessError::Config(format!("log line '{line}': {why}"));
    let mut parts = line.trim().split(" | ");
    let head = parts.next().and_then(|h| h.strip_prefix('#')).ok_or_else(|| bad("missing #k/N"))?;
    let (k, n) = head.split_once('/').ok_or_else(|| bad("missing #k/N"))?;
    let iteration = k.parse().map_err(|_| bad("bad iteration"))?;
    let max_iterations = n.parse().map_err(|_| bad("bad iteration cap"))?;
    let controller = parts.next().and_then(|t| t.strip_prefix("Type:")).ok_or_else(|| bad("missing Type"))?.to_string();
    let mut gains = Vec::new();
    let mut metrics = Vec::new();
    for p in parts {
        let (key, val) = p.split_once(':').ok_or_else(|| bad("field without ':'"))?;
        let pair = (key.to_string(), val.to_string());
        if METRIC_KEYS.contains(&key) {
            metrics.push(pair);
        } else if metrics.is_empty() {
            gains.push(pair);
        } else {
            return Err(bad("gain after metrics"));
        }
    }
    Ok(LogLine { iteration, max_iterations, controller, gains, metrics })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldDeviation {
    pub line: usize,
    pub field: String,
    pub expected: String,
    pub actual: String,
    /// Relative deviation for numeric fields, `None` when either side is not a finite number.
    pub relative: Option<f64>,
}

/// Line-by-line comparison report between a reference log and a fresh one.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Comparison {
    pub lines_expected: usize,
    pub lines_actual: usize,
    /// Differences in iteration index, cap, controller type or gains.
    pub shared_mismatches: Vec<FieldDeviation>,
    /// Every metric field that differs in its printed form.
    pub metric_deviations: Vec<FieldDeviation>,
}

impl Comparison {
    pub fn shared_fields_match(&self) -> bool {
        self.lines_expected == self.lines_actual && self.shared_mismatches.is_empty()
    }

    pub fn worst_relative(&self, field: &str) -> Option<f64> {
        self.metric_deviations.iter().filter(|d| d.field == field).filter_map(|d| d.relative).reduce(f64::max)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "lines: expected {}, actual {}; shared-field mismatches: {}; metric fields differing: {}\n",
            self.lines_expected,
            self.lines_actual,
            self.shared_mismatches.len(),
            self.metric_deviations.len()
        );
        for d in &self.shared_mismatches {
            let _ = writeln!(s, "  line {} {}: expected {} got {}", d.line, d.field, d.expected, d.actual);
        }
        for key in METRIC_KEYS {
            let n = self.metric_deviations.iter().filter(|d| d.field == key).count();
            if n > 0 {
                let worst = self.worst_relative(key).map_or("n/a".into(), |w| format!("{:.2}%", 100.0 * w));
                let _ = writeln!(s, "  {key}: {n} lines differ, worst relative deviation {worst}");
            }
        }
        s
    }
}

fn relative(expected: &str, actual: &str) -> Option<f64> {
    let (e, a) = (expected.parse::<f64>().ok()?, actual.parse::<f64>().ok()?);
    if !(e.is_finite() && a.is_finite()) {
        return None;
    }
    Some((a - e).abs() / e.abs().max(1e-12))
}

pub fn compare(expected: &[LogLine], actual: &[LogLine]) -> Comparison {
    let mut c = Comparison { lines_expected: expected.len(), lines_actual: actual.len(), ..Default::default() };
    for (i, (e, a)) in expected.iter().zip(actual).enumerate() {
        let line = i + 1;
        let mut shared = |field: &str, ev: String, av: String| {
            if ev != av {
                c.shared_mismatches.push(FieldDeviation {
                    line,
                    field: field.into(),
                    relative: relative(&ev, &av),
                    expected: ev,
                    actual: av,
                });
            }
        };
        shared("#k", e.iteration.to_string(), a.iteration.to_string());
        shared("N", e.max_iterations.to_string(), a.max_iterations.to_string());
        shared("Type", e.controller.clone(), a.controller.clone());
        shared("gains", fmt_pairs(&e.gains), fmt_pairs(&a.gains));
        for (key, ev) in &e.metrics {
            let av = a.metrics.iter().find(|(k, _)| k == key).map_or(String::new(), |(_, v)| v.clone());
            if *ev != av {
                c.metric_deviations.push(FieldDeviation {
                    line,
                    field: key.clone(),
                    relative: relative(ev, &av),
                    expected: ev.clone(),
                    actual: av,
                });
            }
        }
    }
    c
}

fn fmt_pairs(p: &[(String, String)]) -> String {
    p.iter().map(|(k, v)| format!("{k}:{v}")).collect::<Vec<_>>().join(" | ")
}

/// Reads a reference log, skipping blank lines and `//` comments.
pub fn read_log(text: &str) -> Result<Vec<LogLine>> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with("//")).map(parse).collect()
}
