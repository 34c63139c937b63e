use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use loopsmith::commands;
use loopsmith::plotdata;
use loopsmith::{HarnessError, Result};
use loopsmith_core::plant::PlantId;

#[derive(Parser)]
#[command(name = "loopsmith", version, about = "Multi-agent controller tuning harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full design loop and write a run directory.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Run only this seed instead of the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Root for run directories (default: config out_dir, then ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate fixed-gain methods over seeded episodes.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// First episode seed; episode k uses seed + k.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory for comparison.csv and comparison.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the Riccati equation for a plant or an explicit (A, B).
    Lqr {
        #[arg(long, conflicts_with_all = ["a", "b"], required_unless_present = "a")]
        plant: Option<PlantId>,
        /// Rows separated by ';', entries by spaces or commas.
        #[arg(long, requires = "b")]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        /// Diagonal of Q, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        q: Vec<f64>,
        #[arg(long)]
        r: f64,
        /// Write the audit JSON here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write evolution and best-trajectory CSVs for a run directory.
    Plotdata {
        run_dir: PathBuf,
        /// Output directory (default: the run directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run a configuration with every agent replaying a transcript.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        /// Reference log lines to compare against.
        #[arg(long)]
        expected: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Writes to stdout; a reader that went away (`| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(HarnessError::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Optimize { config, seed, out } => {
            commands::optimize(&config, seed, out.as_deref(), true)?;
        }
        Command::Montecarlo { config, runs, seed, jobs, out } => {
            let table = commands::montecarlo(&config, runs, seed, jobs, out.as_deref())?;
            emit(&table.to_text())?;
        }
        Command::Lqr { plant, a, b, q, r, out } => {
            let audit = match (plant, a, b) {
                (Some(p), _, _) => commands::lqr_plant(p, &q, r)?,
                (None, Some(a), Some(b)) => commands::lqr_system(&a, &b, &q, r)?,
                _ => return Err(HarnessError::Config("give --plant or both --a and --b".into())),
            };
            let text = serde_json::to_string_pretty(&audit).expect("audit serializes");
            emit(&format!("{text}\n"))?;
            if let Some(p) = out {
                std::fs::write(&p, text + "\n").map_err(|e| HarnessError::io(p, e))?;
            }
        }
        Command::Plotdata { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.clone());
            let files = plotdata::plotdata(&run_dir, &out)?;
            emit(&files.iter().map(|f| format!("{}\n", f.display())).collect::<String>())?;
        }
        Command::Replay { config, transcript, expected, out } => {
            let r = commands::replay(&config, &transcript, expected.as_deref(), out.as_deref(), true)?;
            if r.comparison.as_ref().is_some_and(|c| !c.shared_fields_match()) {
                return Err(HarnessError::Failed("replayed log differs from the reference in shared fields".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
