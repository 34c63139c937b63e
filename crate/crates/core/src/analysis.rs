//! Trend analyzers over the shared buffer.
//!
//! The terminator sees two summaries of the most recent records: how much
//! the headline metrics moved between the first and last record of the
//! window, and how much the gains are still moving from one proposal to the
//! next. The juror additionally sees per-gain statistics of everything
//! proposed since the last range change.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::controller::{Gains, ParamMap};
use crate::error::Error;
use crate::metrics::TrajectoryMetrics;

/// Records considered by the trend analyzers.
pub const ANALYSIS_WINDOW: usize = 5;

/// A gain set counts as converged when no gain moves more than this, in percent.
pub const CONVERGENCE_PERCENT: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub mse_change: f64,
    pub settling_time_change: f64,
    pub overshoot_change: f64,
    pub iterations_analyzed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub parameter_changes: ParamMap<f64>,
    pub max_change_percent: f64,
    pub converged: bool,
    pub iterations_analyzed: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterStatistics {
    pub gains: ParamMap<GainStats>,
    pub samples: usize,
    pub stable_samples: usize,
    pub stability_rate: f64,
}

/// Percent reduction from `first` to `last`; positive means the value went down.
fn percent_reduction(first: f64, last: f64) -> f64 {
    if first == 0.0 || !first.is_finite() || !last.is_finite() {
        return 0.0;
    }
    100.0 * (first - last) / first
}

fn need_two(n: usize, what: &str) -> Result<(), Error> {
    if n < 2 {
        return Err(Error::InsufficientData(format!("{what} needs at least 2 records, got {n}")));
    }
    Ok(())
}

pub fn improvement_analysis(window: &[TrajectoryMetrics]) -> Result<Improvement, Error> {
    need_two(window.len(), "improvement analysis")?;
    let (a, b) = (&window[0], &window[window.len() - 1]);
    Ok(Improvement {
        mse_change: percent_reduction(a.mse, b.mse),
        settling_time_change: percent_reduction(a.settling_time, b.settling_time),
        overshoot_change: percent_reduction(a.overshoot, b.overshoot),
        iterations_analyzed: window.len(),
    })
}

/// Mean relative step size of each gain across consecutive proposals.
///
/// Names are taken from the first record; a step from a zero value has no
/// relative size and is skipped.
pub fn convergence_analysis(window: &[Gains]) -> Result<Convergence, Error> {
    need_two(window.len(), "convergence analysis")?;
    let mut changes = ParamMap::new();
    let mut max_change: f64 = 0.0;
    for name in window[0].names() {
        let series: Vec<f64> = window.iter().filter_map(|g| g.get(name).copied()).collect();
        let steps: Vec<f64> = series
            .windows(2)
            .filter(|w| w[0] != 0.0 && w[0].is_finite() && w[1].is_finite())
            .map(|w| 100.0 * libm::fabs(w[1] - w[0]) / libm::fabs(w[0]))
            .collect();
        let mean = if steps.is_empty() { 0.0 } else { steps.iter().sum::<f64>() / steps.len() as f64 };
        max_change = max_change.max(mean);
        changes.insert(name, mean);
    }
    Ok(Convergence {
        parameter_changes: changes,
        max_change_percent: max_change,
        converged: max_change <= CONVERGENCE_PERCENT,
        iterations_analyzed: window.len(),
    })
}

/// Population statistics of each gain plus the fraction of stable runs.
pub fn parameter_statistics(samples: &[(&Gains, bool)]) -> Result<ParameterStatistics, Error> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("parameter statistics need at least one record".into()));
    }
    let n = samples.len() as f64;
    let mut gains = ParamMap::new();
    for name in samples[0].0.names() {
        let xs: Vec<f64> = samples.iter().filter_map(|(g, _)| g.get(name).copied()).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        gains.insert(
            name,
            GainStats {
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                mean,
                std: libm::sqrt(var),
            },
        );
    }
    let stable_samples = samples.iter().filter(|(_, s)| *s).count();
    Ok(ParameterStatistics { gains, samples: samples.len(), stable_samples, stability_rate: stable_samples as f64 / n })
}
