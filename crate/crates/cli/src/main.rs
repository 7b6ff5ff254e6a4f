//! `upfair`: two-stage proportional-fair rate allocation.
//!
//! Exit codes: 0 success, 1 usage or data error, 2 non-convergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use upfair_cli::{
    execute_oracle_check, execute_run, execute_sweep, load, oracle_check_csv, write_run_outputs,
    Settings, SweepSpec,
};
use upfair_core::scenario::Scenario;

#[derive(Parser)]
#[command(
    name = "upfair",
    about = "Two-stage proportional-fair rate allocation for spectrum shared with radar",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Allocate both bands once and write allocation.csv plus trace.csv.
    Run(RunArgs),
    /// Sweep the total budget with radar-first fill and write sweep.csv.
    Sweep(SweepArgs),
    /// Score both stages against the continuous reference solver.
    OracleCheck(OracleCheckArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Built-in scenario name (table1).
    #[arg(long, value_name = "NAME")]
    builtin: Option<String>,
    /// Scenario TOML file.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
}

#[derive(Args)]
struct Tuning {
    /// Convergence threshold on per-sector aggregate bid changes.
    #[arg(long, default_value_t = upfair_core::protocol::DEFAULT_DELTA)]
    delta: f64,
    /// Iteration cap per stage.
    #[arg(long, default_value_t = upfair_core::protocol::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    /// Starting bid for every participating user.
    #[arg(long, default_value_t = upfair_core::protocol::DEFAULT_INITIAL_BID)]
    initial_bid: f64,
    /// Disable the radar interference mask.
    #[arg(long)]
    no_radar: bool,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: PathBuf,
}

impl Tuning {
    fn settings(&self) -> Settings {
        Settings { delta: self.delta, max_iters: self.max_iters, initial_bid: self.initial_bid }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    tuning: Tuning,
    /// Radar-band budget override.
    #[arg(long, value_name = "RATE")]
    r_radar: Option<f64>,
    /// Communication-band budget override.
    #[arg(long, value_name = "RATE")]
    r_comm: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    tuning: Tuning,
    /// Smallest total budget.
    #[arg(long, value_name = "RATE")]
    min: f64,
    /// Largest total budget.
    #[arg(long, value_name = "RATE")]
    max: f64,
    /// Budget increment.
    #[arg(long, value_name = "RATE")]
    step: f64,
    /// Also write a per-point convergence trace.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct OracleCheckArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    tuning: Tuning,
    /// Largest acceptable objective gap.
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
}

fn scenario_for(source: &Source, tuning: &Tuning) -> upfair_cli::Result<Scenario> {
    let scenario = load(source.builtin.as_deref(), source.scenario.as_deref())?;
    Ok(if tuning.no_radar { scenario.without_interference() } else { scenario })
}

fn cmd_run(args: &RunArgs) -> upfair_cli::Result<u8> {
    let scenario = scenario_for(&args.source, &args.tuning)?;
    let r_radar = args.r_radar.unwrap_or(scenario.r_radar_total);
    let r_comm = args.r_comm.unwrap_or(scenario.r_comm_total);
    let result = execute_run(&scenario, r_radar, r_comm, &args.tuning.settings())?;
    write_run_outputs(&args.tuning.out, &result)?;
    if result.converged() {
        Ok(0)
    } else {
        eprintln!("allocation stopped at the iteration cap before converging");
        Ok(2)
    }
}

fn cmd_sweep(args: &SweepArgs) -> upfair_cli::Result<u8> {
    let scenario = scenario_for(&args.source, &args.tuning)?;
    let spec = SweepSpec {
        r_total_min: args.min,
        r_total_max: args.max,
        r_total_step: args.step,
    };
    let outcome = execute_sweep(
        &scenario,
        &spec,
        &args.tuning.settings(),
        &args.tuning.out,
        args.trace,
    )?;
    match outcome.aborted_at {
        None => Ok(0),
        Some(r_total) => {
            eprintln!(
                "sweep aborted: no convergence at r_total = {r_total}; \
                 {} rows preserved in sweep.csv",
                outcome.rows_written
            );
            Ok(2)
        }
    }
}

fn cmd_oracle_check(args: &OracleCheckArgs) -> upfair_cli::Result<u8> {
    let scenario = scenario_for(&args.source, &args.tuning)?;
    let rows = execute_oracle_check(
        &scenario,
        scenario.r_radar_total,
        scenario.r_comm_total,
        &args.tuning.settings(),
    )?;
    std::fs::create_dir_all(&args.tuning.out)?;
    std::fs::write(args.tuning.out.join("oracle_check.csv"), oracle_check_csv(&rows))?;
    let mut ok = true;
    for row in &rows {
        let within = row.gap.abs() <= args.tol;
        ok &= within;
        println!(
            "stage {}: protocol {:.9} oracle {:.9} gap {:.3e} [{}]",
            row.stage,
            row.protocol_objective,
            row.oracle_objective,
            row.gap,
            if within { "ok" } else { "MISMATCH" }
        );
    }
    if ok {
        Ok(0)
    } else {
        eprintln!("protocol objective deviates from the oracle beyond {}", args.tol);
        Ok(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::OracleCheck(args) => cmd_oracle_check(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
