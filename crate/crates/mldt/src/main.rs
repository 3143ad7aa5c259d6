//! Batch CLI over the simulation harness: closed-form bound curves, Monte
//! Carlo sweeps, capacity grids, rateless throughput runs, and a
//! bound-bracketing check for uncoded results.

use clap::{Parser, Subcommand};
use mldt::harness::{
    compare_to_bounds, load_config, run_scenario, write_csv, write_dat, RunOptions, Scenario,
    ScenarioKind, SimRow,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mldt", about = "Multilevel detection link-level simulator", version)]
struct Cli {
    /// Scenario configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the seed of every scenario.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// CSV output path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Additional gnuplot-compatible .dat output path.
    #[arg(long, global = true)]
    dat: Option<PathBuf>,
    /// Worker thread count (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Disable decoder early exit so iteration budgets are always spent.
    #[arg(long, global = true)]
    strict_iterations: bool,
    /// Record wall time per point (makes CSV output non-reproducible).
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit the closed-form BER curves (bounds scenarios).
    Bounds,
    /// Run every scenario in the configuration file.
    Simulate,
    /// Run the capacity scenarios.
    Capacity,
    /// Run the rateless throughput scenarios.
    Raptor,
    /// Run the uncoded scenarios and verify the bound bracketing.
    Check,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> mldt::Result<ExitCode> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| mldt::Error::config(format!("thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| mldt::Error::config("--config <file> is required"))?;
    let config = load_config(config_path)?;
    let filter: Option<ScenarioKind> = match cli.command {
        Command::Bounds => Some(ScenarioKind::Bounds),
        Command::Capacity => Some(ScenarioKind::Capacity),
        Command::Raptor => Some(ScenarioKind::RaptorMldt),
        Command::Check => Some(ScenarioKind::UncodedMldt),
        Command::Simulate => None,
    };
    let selected: Vec<&Scenario> = config
        .scenario
        .iter()
        .filter(|sc| filter.is_none_or(|k| sc.kind == k))
        .collect();
    if selected.is_empty() {
        return Err(mldt::Error::config(format!(
            "{}: no matching scenarios for this subcommand",
            config_path.display()
        )));
    }
    let opts = RunOptions {
        strict_iterations: cli.strict_iterations,
        timing: cli.timing,
        seed_override: cli.seed,
    };
    let mut rows: Vec<SimRow> = Vec::new();
    let mut check_failed = false;
    for sc in &selected {
        let sc_rows = run_scenario(sc, &opts)?;
        if matches!(cli.command, Command::Check) {
            let report = compare_to_bounds(&sc_rows, sc.p_users)?;
            for line in &report.lines {
                eprintln!("{}: {line}", sc.name);
            }
            check_failed |= !report.pass();
        }
        rows.extend(sc_rows);
    }
    match &cli.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            write_csv(&mut file, &selected, &rows)?;
        }
        None => {
            let stdout = std::io::stdout();
            write_csv(&mut stdout.lock(), &selected, &rows)?;
        }
    }
    if let Some(path) = &cli.dat {
        let mut file = std::fs::File::create(path)?;
        write_dat(&mut file, &rows)?;
    }
    Ok(if check_failed { ExitCode::from(2) } else { ExitCode::SUCCESS })
}
