//! Scenario files, output formats, and the `pillarsim` command-line runner.
//!
//! The core crate knows physics; this crate knows files. A TOML scenario
//! describes a device and a measurement, a subcommand runs the matching
//! pipeline, and every run stages its outputs (CSV data, JSON reports) plus a
//! `manifest.json` hashing each file — reruns with the same scenario and seed
//! are byte-identical.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 acceptance failure (`paper-check` only).

pub mod check;
pub mod commands;
pub mod output;
pub mod runner;
pub mod scenario;

use clap::{Args, Parser, Subcommand};
use commands::RunContext;
use std::path::PathBuf;

/// What went wrong, sorted by whose fault it is: the inputs (`Config`), the
/// mathematics (`Numeric`), or the device model failing its published
/// reference values (`Acceptance`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CliError {
    /// Bad scenario file, unusable flags, or an I/O problem.
    Config(String),
    /// The solver or a fit failed on otherwise valid inputs.
    Numeric(String),
    /// `paper-check` ran to completion with this many failing rows.
    Acceptance(usize),
}

impl CliError {
    pub fn message(&self) -> String {
        match self {
            CliError::Config(m) => m.clone(),
            CliError::Numeric(m) => m.clone(),
            CliError::Acceptance(n) => format!("paper-check: {n} acceptance row(s) failed"),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }
}

/// Simulator and analysis toolkit for a pulsed, cavity-enhanced single-photon
/// source: master-equation and quantum-jump dynamics, detector-level click
/// streams, correlation analysis, and design formulas.
#[derive(Debug, Parser)]
#[command(name = "pillarsim", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options every subcommand shares.
#[derive(Debug, Args)]
struct CommonArgs {
    /// Directory for output files (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario's base random seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory generation (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

/// Options for subcommands driven by a scenario file.
#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario description (TOML).
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep pillar designs: Purcell factor and extraction efficiency per
    /// diameter/Q pair.
    DesignSweep(ScenarioArgs),
    /// Emission intensity versus emitter–cavity detuning, with a Lorentzian
    /// Purcell fit.
    DetuningScan(ScenarioArgs),
    /// Time-resolved emission histogram and exponential lifetime fit.
    Lifetime(ScenarioArgs),
    /// Detected emission versus pulse area, with damped-oscillation fits.
    Rabi(ScenarioArgs),
    /// Click-stream intensity correlation: histogram and g²(0) report.
    Hbt(ScenarioArgs),
    /// Run the acceptance suite against published reference values and print
    /// a pass/fail table.
    PaperCheck(CommonArgs),
}

fn ctx(common: &CommonArgs) -> RunContext {
    RunContext {
        out_dir: common.out.clone(),
        seed_override: common.seed,
        threads: common.threads,
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::DesignSweep(a) => commands::design_sweep(&a.scenario, &ctx(&a.common)),
        Command::DetuningScan(a) => commands::detuning_scan(&a.scenario, &ctx(&a.common)),
        Command::Lifetime(a) => commands::lifetime(&a.scenario, &ctx(&a.common)),
        Command::Rabi(a) => commands::rabi(&a.scenario, &ctx(&a.common)),
        Command::Hbt(a) => commands::hbt(&a.scenario, &ctx(&a.common)),
        Command::PaperCheck(common) => commands::paper_check(&ctx(common)),
    }
}

/// Parse arguments from the environment, run, and return the process exit
/// code (0/2/3/4; clap handles `--help` and `--version` itself).
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests exit 0 via clap's own printer.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.exit_code()
        }
    }
}
