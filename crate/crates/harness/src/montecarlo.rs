//! Fixed-gain Monte Carlo studies: seeded episodes per scenario and method, averaged.

use std::path::Path;

use loopsmith_core::controller::ControllerSpec;
use loopsmith_core::metrics::{compute_metrics, TrajectoryMetrics};
use loopsmith_core::plant::PlantModel;
use loopsmith_core::scenario::Scenario;
use loopsmith_core::sim::{run_episode, SimConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub method: String,
    pub controller: String,
    pub gains: String,
    pub runs: usize,
    pub mse: f64,
    #[serde(rename = "Ts_s")]
    pub settling_time: f64,
    #[serde(rename = "Mp_percent")]
    pub overshoot: f64,
    pub stable_fraction: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, scenario: &str, method: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.scenario == scenario && r.method == method)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).map_err(|e| HarnessError::Failed(format!("{}: {e}", path.display())))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| HarnessError::Failed(format!("{}: {e}", path.display())))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }

    /// Fixed-width text rendering for the terminal.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<10} {:<10} {:<36} {:>10} {:>8} {:>8} {:>7}\n",
            "scenario", "method", "gains", "MSE", "Ts(s)", "Mp(%)", "stable"
        );
        for r in &self.rows {
            s += &format!(
                "{:<10} {:<10} {:<36} {:>10.4} {:>8.2} {:>8.2} {:>6.0}%\n",
                r.scenario,
                r.method,
                r.gains,
                r.mse,
                r.settling_time,
                r.overshoot,
                100.0 * r.stable_fraction
            );
        }
        s
    }
}

/// Episode seeds: `seed0 + k` for `k` in `0..n`.
pub fn seeds(seed0: u64, n: usize) -> impl Iterator<Item = u64> + Clone + Send {
    (0..n as u64).map(move |k| seed0.wrapping_add(k))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn episode_metrics(
    plant: &PlantModel,
    spec: &ControllerSpec,
    scenario: &Scenario,
    sim: &SimConfig,
    seeds: impl Iterator<Item = u64>,
) -> Result<Vec<TrajectoryMetrics>> {
    let seeds: Vec<u64> = seeds.collect();
    seeds.par_iter().map(|&s| Ok(compute_metrics(&run_episode(plant, spec, scenario, sim, s)?))).collect()
}

pub struct Study<'a> {
    pub plant: &'a PlantModel,
    pub sim: SimConfig,
    pub scenarios: &'a [Scenario],
    pub methods: &'a [(String, ControllerSpec)],
    pub runs: usize,
    pub seed0: u64,
}

impl Study<'_> {
    /// Runs every (scenario, method) pair; rows come out scenario-major in input order.
    pub fn run(&self) -> Result<ComparisonTable> {
        let mut rows = Vec::new();
        for sc in self.scenarios {
            for (name, spec) in self.methods {
                let ms = episode_metrics(self.plant, spec, sc, &self.sim, seeds(self.seed0, self.runs))?;
                let gains = spec.gains.values().map(|g| format!("{g:.4}")).collect::<Vec<_>>().join(", ");
                rows.push(ComparisonRow {
                    scenario: sc.id.clone(),
                    method: name.clone(),
                    controller: spec.kind.to_string(),
                    gains,
                    runs: ms.len(),
                    mse: mean(ms.iter().map(|m| m.mse)),
                    settling_time: mean(ms.iter().map(|m| m.settling_time)),
                    overshoot: mean(ms.iter().map(|m| m.overshoot)),
                    stable_fraction: mean(ms.iter().map(|m| if m.stable { 1.0 } else { 0.0 })),
                });
            }
        }
        Ok(ComparisonTable { rows })
    }

    /// Same as [`Study::run`] inside a pool of `jobs` threads.
    pub fn run_with_jobs(&self, jobs: Option<usize>) -> Result<ComparisonTable> {
        match jobs {
            None => self.run(),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| HarnessError::Failed(format!("thread pool: {e}")))?
                .install(|| self.run()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use loopsmith_core::controller::ControllerKind;
    use loopsmith_core::plant::PlantId;
    use loopsmith_core::scenario::default_ladder;

    #[test]
    fn one_deterministic_run_equals_the_single_episode() {
        let plant = PlantModel::nominal(PlantId::DcMotor);
        let spec = ControllerSpec::with_gains(ControllerKind::P, &plant, &[12.75]).unwrap();
        let sc = default_ladder(PlantId::DcMotor)[0].clone();
        let sim = SimConfig::default_for(PlantId::DcMotor);
        let single = compute_metrics(&run_episode(&plant, &spec, &sc, &sim, 3).unwrap());
        let methods = vec![("P".to_string(), spec)];
        let t = Study { plant: &plant, sim, scenarios: &[sc], methods: &methods, runs: 1, seed0: 3 }.run().unwrap();
        let r = &t.rows[0];
        assert_eq!(
            (r.mse, r.settling_time, r.overshoot, r.runs),
            (single.mse, single.settling_time, single.overshoot, 1)
        );
    }

    #[test]
    fn tables_are_seed_stable_and_pool_independent() {
        let plant = PlantModel::nominal(PlantId::BallBeam);
        let spec = ControllerSpec::with_gains(ControllerKind::FSF, &plant, &[5.75, 9.5, 47.5, 5.75]).unwrap();
        let ladder = default_ladder(PlantId::BallBeam);
        let methods = vec![("FSF".to_string(), spec)];
        let study = Study {
            plant: &plant,
            sim: SimConfig::default_for(PlantId::BallBeam),
            scenarios: &ladder[1..2],
            methods: &methods,
            runs: 6,
            seed0: 40,
        };
        let a = study.run_with_jobs(Some(1)).unwrap();
        let b = study.run_with_jobs(Some(3)).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        a.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert!(
            text.starts_with("scenario,method,controller,gains,runs,mse,Ts_s,Mp_percent,stable_fraction\n"),
            "{text}"
        );
    }
}
