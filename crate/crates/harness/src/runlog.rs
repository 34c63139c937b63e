//! Run directories and the observer that streams iterations into them.
//!
//! Layout of `runs/<timestamp>-<plant>/`:
//! `config.json` (snapshot), `iterations.jsonl`, `log.txt`, `events.log`,
//! `report.json` and `transcript.jsonl`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use loopsmith_core::orchestrator::{Observer, RunEvent};
use loopsmith_core::plant::PlantId;
use serde::Serialize;

use crate::error::{HarnessError, Result};
use crate::logline;

pub const CONFIG: &str = "config.json";
pub const ITERATIONS: &str = "iterations.jsonl";
pub const LOG: &str = "log.txt";
pub const EVENTS: &str = "events.log";
pub const REPORT: &str = "report.json";
pub const TRANSCRIPT: &str = "transcript.jsonl";

/// Creates `<root>/<UTC timestamp>-<plant>`, adding a counter if it exists.
pub fn create_run_dir(root: &Path, plant: PlantId) -> Result<PathBuf> {
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
    let mut dir = root.join(format!("{stamp}-{plant}"));
    let mut n = 1;
    while dir.exists() {
        n += 1;
        dir = root.join(format!("{stamp}-{plant}-{n}"));
    }
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    Ok(dir)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
}

fn create(path: PathBuf) -> Result<(PathBuf, BufWriter<File>)> {
    let f = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
    Ok((path, BufWriter::new(f)))
}

/// Writes every iteration as JSON and as a log line while the run progresses.
pub struct RunLogger {
    iterations: (PathBuf, BufWriter<File>),
    log: (PathBuf, BufWriter<File>),
    events: (PathBuf, BufWriter<File>),
    echo: bool,
    last: Instant,
    failed: Option<HarnessError>,
    lines: Vec<String>,
}

impl RunLogger {
    pub fn new(dir: &Path, echo: bool) -> Result<Self> {
        Ok(RunLogger {
            iterations: create(dir.join(ITERATIONS))?,
            log: create(dir.join(LOG))?,
            events: create(dir.join(EVENTS))?,
            echo,
            last: Instant::now(),
            failed: None,
            lines: Vec::new(),
        })
    }

    /// Log lines written so far.
    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    /// Flushes the files and reports the first write failure, if any.
    pub fn finish(mut self) -> Result<Vec<String>> {
        for (path, w) in [&mut self.iterations, &mut self.log, &mut self.events] {
            if let Err(e) = w.flush() {
                self.failed.get_or_insert(HarnessError::io(path.clone(), e));
            }
        }
        match self.failed {
            Some(e) => Err(e),
            None => Ok(self.lines),
        }
    }

    fn put(&mut self, which: usize, text: &str) {
        let (path, w) = match which {
            0 => &mut self.iterations,
            1 => &mut self.log,
            _ => &mut self.events,
        };
        if let Err(e) = writeln!(w, "{text}") {
            self.failed.get_or_insert(HarnessError::io(path.clone(), e));
        }
    }

    fn event(&mut self, text: String) {
        if self.echo {
            eprintln!("{text}");
        }
        self.put(2, &text);
    }
}

impl Observer for RunLogger {
    fn on_event(&mut self, event: &RunEvent<'_>) {
        match event {
            RunEvent::Iteration(rec) => {
                let mut rec = (*rec).clone();
                rec.wall_time = Some(self.last.elapsed().as_secs_f64());
                self.last = Instant::now();
                let json = serde_json::to_string(&rec).expect("records serialize");
                self.put(0, &json);
                let line = logline::render(&rec);
                if self.echo {
                    println!("{line}");
                }
                self.put(1, &line);
                self.lines.push(line);
                let verdict = rec.verdict.as_ref().map_or("none", |v| v.decision.as_str());
                let decision = rec.decision.map_or("none", |d| d.as_str());
                self.event(format!("iteration {}: terminator said {verdict}, loop decision {decision}", rec.iteration));
            }
            RunEvent::ControllerSelected { kind, choice } => {
                self.last = Instant::now();
                self.event(format!("controller {kind} selected: {}", choice.reasoning));
            }
            RunEvent::ScenarioStarted { level, scenario } => {
                self.last = Instant::now();
                self.event(format!(
                    "scenario level {} ({}) started: {}",
                    level + 1,
                    scenario.id,
                    serde_json::to_string(scenario).unwrap_or_default()
                ));
            }
            RunEvent::LoopFinished { outcome, iterations, round } => {
                self.event(format!("round {round} finished after {iterations} iterations: {outcome:?}"));
            }
            RunEvent::Juror { verdict, applied } => {
                let ranges = applied.map(|r| serde_json::to_string(r).unwrap_or_default());
                self.event(format!(
                    "juror: {} {}",
                    verdict.decision.as_str(),
                    ranges.unwrap_or_else(|| "(ranges unchanged)".into())
                ));
            }
            RunEvent::AgentFailure { role, error } => self.event(format!("{role} failed: {error}")),
            RunEvent::ScenarioFinished { level, completed } => {
                self.event(format!(
                    "scenario level {} {}",
                    level + 1,
                    if *completed { "completed" } else { "not completed" }
                ));
            }
        }
    }
}
