use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use edgesched::engine::SchedulerKind;
use edgesched::harness::{
    oracle_report, render_csv, render_oracle_csv, run_scenario, run_sweep, validate_document, HarnessError,
    RunOptions, ScenarioConfig, SweepConfig,
};

#[derive(Parser)]
#[command(name = "edgesched", version, about = "Edge job placement and flow scheduling simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Override the scenario seed (for sweeps: run only this seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// lr | br | tp | otfs | otfa
    #[arg(long, global = true)]
    scheduler: Option<SchedulerKind>,
    /// Candidate paths per flow.
    #[arg(long = "k-paths", global = true)]
    k_paths: Option<usize>,
    /// Write outputs into this directory instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Record the event log and per-job plan policies.
    #[arg(long = "log-events", global = true)]
    log_events: bool,
    /// Fill the runtime_ms column with wall-clock time.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and report its metrics.
    Run { scenario: PathBuf },
    /// Vary one axis across seeds and schedulers.
    Sweep { sweep: PathBuf },
    /// Compare rounded plans with exhaustive search on small instances.
    Oracle { scenario: PathBuf },
    /// Check a network, job, scenario or sweep document.
    Validate { file: PathBuf },
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Result<(), HarnessError> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
            let path = dir.join(file);
            fs::write(&path, text).map_err(|e| io_err(&path, e))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

fn load_scenario(path: &Path, common: &Common) -> Result<(ScenarioConfig, PathBuf), HarnessError> {
    let (mut cfg, dir) = ScenarioConfig::load(path)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(s) = common.scheduler {
        cfg.scheduler = s;
    }
    if let Some(k) = common.k_paths {
        cfg.k_paths = k;
    }
    Ok((cfg, dir))
}

fn execute(cli: &Cli) -> Result<(), HarnessError> {
    let common = &cli.common;
    let out = common.out.as_deref();
    match &cli.command {
        Command::Run { scenario } => {
            let (cfg, dir) = load_scenario(scenario, common)?;
            let options = RunOptions {
                log_events: common.log_events,
                timing: common.timing,
            };
            let result = run_scenario(&cfg, &dir, options)?;
            match common.format {
                Format::Csv => emit(out, "metrics.csv", &render_csv(std::slice::from_ref(&result.report.row)))?,
                Format::Json => emit(out, "metrics.json", &to_json(&result.report))?,
            }
            if common.log_events {
                if out.is_some() {
                    emit(out, "events.jsonl", &result.event_log())?;
                    emit(out, "plans.json", &to_json(&result.policies))?;
                } else {
                    eprint!("{}", result.event_log());
                }
            }
        }
        Command::Sweep { sweep } => {
            let text = fs::read_to_string(sweep).map_err(|e| io_err(sweep, e))?;
            let mut cfg = SweepConfig::from_json(&text)?;
            if let Some(seed) = common.seed {
                cfg.seeds = vec![seed];
            }
            if let Some(s) = common.scheduler {
                cfg.schedulers = vec![s];
            }
            let dir = sweep.parent().unwrap_or(Path::new("."));
            let dir = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
            if let Some(k) = common.k_paths {
                let (mut base, base_dir) = cfg.base_scenario(dir)?;
                base.k_paths = k;
                cfg.base = edgesched::harness::BaseScenario::Inline(Box::new(base));
                let rows = run_sweep(&cfg, &base_dir, common.timing)?;
                return write_rows(out, common.format, &rows);
            }
            let rows = run_sweep(&cfg, dir, common.timing)?;
            write_rows(out, common.format, &rows)?;
        }
        Command::Oracle { scenario } => {
            let (cfg, dir) = load_scenario(scenario, common)?;
            let rows = oracle_report(&cfg, &dir)?;
            match common.format {
                Format::Csv => emit(out, "oracle.csv", &render_oracle_csv(&rows))?,
                Format::Json => emit(out, "oracle.json", &to_json(&rows))?,
            }
            if out.is_some() {
                for row in &rows {
                    if let Some(program) = &row.program {
                        emit(out, &format!("{}.lp.txt", row.job), program)?;
                    }
                }
            }
        }
        Command::Validate { file } => {
            let kind = validate_document(file)?;
            println!("ok {kind}");
        }
    }
    Ok(())
}

fn write_rows(out: Option<&Path>, format: Format, rows: &[edgesched::harness::MetricsRow]) -> Result<(), HarnessError> {
    match format {
        Format::Csv => emit(out, "sweep.csv", &render_csv(rows)),
        Format::Json => emit(out, "sweep.json", &to_json(&rows)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
