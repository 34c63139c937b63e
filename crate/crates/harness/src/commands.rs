//! The subcommands, callable without the CLI.

use std::path::{Path, PathBuf};

use loopsmith_core::lqr::{lqr_gains, solve_care, LqrProblem};
use loopsmith_core::orchestrator::{run_full, FinalReport, RunStatus};
use loopsmith_core::plant::{PlantId, PlantModel};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::{AgentSpec, RunConfig};
use crate::error::{HarnessError, Result};
use crate::logline::{self, Comparison};
use crate::montecarlo::{ComparisonTable, Study};
use crate::runlog::{self, RunLogger};
use crate::transcript::{self, Sink};

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub report: FinalReport,
    pub log_lines: Vec<String>,
}

fn out_root(cfg: &RunConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("runs"))
}

/// One optimization run for `seed`, persisted under `root`.
pub fn optimize_seed(cfg: &RunConfig, seed: u64, root: &Path, echo: bool) -> Result<RunSummary> {
    let dir = runlog::create_run_dir(root, cfg.plant)?;
    let mut snapshot = cfg.clone();
    snapshot.seeds = vec![seed];
    runlog::write_json(&dir.join(runlog::CONFIG), &snapshot)?;

    let sink = Sink::default();
    let mut binding = cfg.binding(&sink)?;
    let mut logger = RunLogger::new(&dir, echo)?;
    let outcome = run_full(cfg.run_spec(seed)?, &mut binding, &mut logger);
    transcript::write(&dir.join(runlog::TRANSCRIPT), &sink.lock().expect("transcript sink poisoned"))?;
    let log_lines = logger.finish()?;
    let out = outcome?;
    runlog::write_json(&dir.join(runlog::REPORT), &out.report)?;
    if echo {
        println!("{}", out.report.summary);
        println!("run directory: {}", dir.display());
    }
    Ok(RunSummary { dir, report: out.report, log_lines })
}

/// Runs the configuration once per seed (or once for `seed` when given).
pub fn optimize(cfg_path: &Path, seed: Option<u64>, out: Option<&Path>, echo: bool) -> Result<Vec<RunSummary>> {
    let cfg = RunConfig::load(cfg_path)?;
    let root = out_root(&cfg, out);
    let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
    seeds.into_iter().map(|s| optimize_seed(&cfg, s, &root, echo)).collect()
}

#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub run: RunSummary,
    pub comparison: Option<Comparison>,
}

/// Replays a transcript for every role and optionally compares against a reference log.
pub fn replay(
    cfg_path: &Path,
    transcript: &Path,
    expected_log: Option<&Path>,
    out: Option<&Path>,
    echo: bool,
) -> Result<ReplayOutcome> {
    let mut cfg = RunConfig::load(cfg_path)?;
    cfg.agents.clear();
    cfg.agents.insert("default".into(), AgentSpec::Replay { transcript: transcript.to_path_buf() });
    let root = out_root(&cfg, out);
    let run = optimize_seed(&cfg, cfg.seeds[0], &root, echo)?;
    let comparison = match expected_log {
        None => None,
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Config(format!("{}: {e}", p.display())))?;
            let expected = logline::read_log(&text)?;
            let actual = run.log_lines.iter().map(|l| logline::parse(l)).collect::<Result<Vec<_>>>()?;
            let c = logline::compare(&expected, &actual);
            runlog::write_json(&run.dir.join("comparison.json"), &c)?;
            if echo {
                print!("{}", c.summary());
            }
            Some(c)
        }
    };
    Ok(ReplayOutcome { run, comparison })
}

/// Monte Carlo table for the config's `montecarlo` section; writes CSV and JSON when `out` is set.
pub fn montecarlo(
    cfg_path: &Path,
    runs: Option<usize>,
    seed: Option<u64>,
    jobs: Option<usize>,
    out: Option<&Path>,
) -> Result<ComparisonTable> {
    let cfg = RunConfig::load(cfg_path)?;
    let mc = cfg.montecarlo.clone().ok_or_else(|| HarnessError::Config("config has no montecarlo section".into()))?;
    let plant = cfg.plant_model();
    let methods = mc.methods.iter().map(|m| Ok((m.name.clone(), m.resolve(&plant)?))).collect::<Result<Vec<_>>>()?;
    let scenarios = mc.scenarios.clone().unwrap_or_else(|| cfg.ladder());
    let study = Study {
        plant: &plant,
        sim: cfg.sim(),
        scenarios: &scenarios,
        methods: &methods,
        runs: runs.unwrap_or(mc.runs),
        seed0: seed.unwrap_or(cfg.seeds[0]),
    };
    let table = study.run_with_jobs(jobs)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        table.write_csv(&dir.join("comparison.csv"))?;
        runlog::write_json(&dir.join("comparison.json"), &table)?;
    }
    Ok(table)
}

/// Audit output of the `lqr` command.
#[derive(Clone, Debug, Serialize)]
pub struct LqrAudit {
    pub system: String,
    pub q_diag: Vec<f64>,
    pub r: f64,
    pub k: Vec<f64>,
    pub closed_loop_eigenvalues: Vec<[f64; 2]>,
    pub residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<loopsmith_core::lqr::LqrReport>,
}

pub fn lqr_plant(plant: PlantId, q: &[f64], r: f64) -> Result<LqrAudit> {
    let (_, rep) = lqr_gains(&PlantModel::nominal(plant), q, r)?;
    Ok(LqrAudit {
        system: plant.to_string(),
        q_diag: q.to_vec(),
        r,
        k: rep.k.clone(),
        closed_loop_eigenvalues: rep.closed_loop_eigenvalues.clone(),
        residual: rep.residual,
        detail: Some(rep),
    })
}

/// Parses `"a11 a12; a21 a22"` into a row-major matrix.
pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| HarnessError::Config(format!("'{s}' is not a number"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(HarnessError::Config(format!("matrix '{text}' has ragged or empty rows")));
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

/// LQR for an explicit single-input system `(A, B)`.
pub fn lqr_system(a: &str, b: &str, q: &[f64], r: f64) -> Result<LqrAudit> {
    let a = parse_matrix(a)?;
    let mut b = parse_matrix(b)?;
    if b.nrows() == 1 && a.nrows() > 1 {
        b = b.transpose();
    }
    if q.len() != a.nrows() {
        return Err(HarnessError::Config(format!("Q needs {} diagonal entries", a.nrows())));
    }
    let sol = solve_care(&LqrProblem::new(a, b, q, r))?;
    Ok(LqrAudit {
        system: "custom".into(),
        q_diag: q.to_vec(),
        r,
        k: sol.k.row(0).iter().copied().collect(),
        closed_loop_eigenvalues: sol.eigenvalues.iter().map(|(re, im)| [*re, *im]).collect(),
        residual: sol.residual,
        detail: None,
    })
}

pub fn exit_status(report: &FinalReport) -> RunStatus {
    report.status
}
