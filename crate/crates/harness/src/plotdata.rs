//! CSV bundles for plotting parameter and metric evolution.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use loopsmith_core::buffer::IterationRecord;
use loopsmith_core::controller::ControllerSpec;
use loopsmith_core::orchestrator::FinalReport;
use loopsmith_core::sim::run_episode;

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::runlog;

pub fn read_iterations(run_dir: &Path) -> Result<Vec<IterationRecord>> {
    let path = run_dir.join(runlog::ITERATIONS);
    let file = std::fs::File::open(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| HarnessError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    if out.is_empty() {
        return Err(HarnessError::Config(format!("{} has no iterations", path.display())));
    }
    Ok(out)
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Failed(format!("{}: {e}", path.display()))
}

/// One evolution CSV per controller type: `iter, scenario, round, <gains>, mse, Ts, Mp, stable`.
pub fn write_evolution(records: &[IterationRecord], out: &Path) -> Result<Vec<PathBuf>> {
    let mut by_kind: BTreeMap<String, Vec<&IterationRecord>> = BTreeMap::new();
    for r in records {
        by_kind.entry(r.controller.to_string()).or_default().push(r);
    }
    let mut written = Vec::new();
    for (kind, recs) in by_kind {
        let path = out.join(format!("evolution_{kind}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let mut header = vec!["iter".to_string(), "scenario".into(), "round".into()];
        header.extend(recs[0].gains.names().map(String::from));
        header.extend(["mse", "Ts", "Mp", "stable"].map(String::from));
        w.write_record(&header).map_err(|e| csv_err(&path, e))?;
        for (i, r) in recs.iter().enumerate() {
            let mut row = vec![(i + 1).to_string(), r.scenario.clone(), r.round.to_string()];
            row.extend(r.gains.values().map(|g| g.to_string()));
            row.extend([r.metrics.mse, r.metrics.settling_time, r.metrics.overshoot].map(|x| x.to_string()));
            row.push(r.metrics.stable.to_string());
            w.write_record(&row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Re-simulates each scenario's best gains and writes `best_trajectory_<level>.csv`.
pub fn write_best_trajectories(run_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let cfg_path = run_dir.join(runlog::CONFIG);
    let rep_path = run_dir.join(runlog::REPORT);
    if !cfg_path.exists() || !rep_path.exists() {
        return Ok(Vec::new());
    }
    let cfg: RunConfig =
        serde_json::from_str(&std::fs::read_to_string(&cfg_path).map_err(|e| HarnessError::io(&cfg_path, e))?)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", cfg_path.display())))?;
    let report: FinalReport =
        serde_json::from_str(&std::fs::read_to_string(&rep_path).map_err(|e| HarnessError::io(&rep_path, e))?)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", rep_path.display())))?;
    let plant = cfg.plant_model();
    let names = plant.state_names();
    let mut written = Vec::new();
    for res in &report.results {
        let Some(best) = &res.best else { continue };
        let values: Vec<f64> = best.gains.values().copied().collect();
        let spec = ControllerSpec::with_gains(res.controller, &plant, &values)?;
        let traj = run_episode(&plant, &spec, &res.scenario, &cfg.sim(), report.seed)?;
        let path = out.join(format!("best_trajectory_{}.csv", res.level + 1));
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
        let mut header = vec!["t".to_string()];
        header.extend(names.iter().map(|s| s.to_string()));
        header.extend(["u", "e"].map(String::from));
        w.write_record(&header).map_err(|e| csv_err(&path, e))?;
        for i in 0..traj.len() {
            let mut row = vec![traj.time[i].to_string()];
            row.extend(traj.states[i].as_slice().iter().map(|x| x.to_string()));
            row.push(traj.control[i].to_string());
            row.push(traj.error[i].to_string());
            w.write_record(&row).map_err(|e| csv_err(&path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Both bundles; a run directory without iterations is a configuration error.
pub fn plotdata(run_dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let records = read_iterations(run_dir)?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let mut files = write_evolution(&records, out)?;
    files.extend(write_best_trajectories(run_dir, out)?);
    Ok(files)
}
