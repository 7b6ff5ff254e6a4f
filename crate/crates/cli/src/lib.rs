//! Plumbing behind the `upfair` binary: scenario loading, budget sweeps,
//! CSV rendering, and the oracle cross-check. Everything here is callable
//! from tests; `main` only parses flags and maps outcomes to exit codes.
//!
//! Output files are plot-ready CSV. All numbers are printed with Rust's
//! shortest round-trip float formatting and every computation is strictly
//! sequential and allocation-order deterministic, so repeated runs of the
//! same command produce byte-identical files.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use upfair_core::error::Error as CoreError;
use upfair_core::protocol::{run_stage, run_two_stage, AllocationResult, Stage, StageConfig};
use upfair_core::scenario::{builtin_table1, load_scenario, Scenario};
use upfair_core::{oracle_ascent_solve, pooled_objective, OracleProblem};

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Io(std::io::Error),
    Usage(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Usage(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

// ---------------------------------------------------------------------------
// scenario loading and stage settings
// ---------------------------------------------------------------------------

/// Loads the scenario named by `--builtin` or the TOML file at `--scenario`.
pub fn load(builtin: Option<&str>, path: Option<&Path>) -> Result<Scenario> {
    match (builtin, path) {
        (Some("table1"), None) => Ok(builtin_table1()),
        (Some(name), None) => Err(CliError::Usage(format!(
            "unknown builtin scenario {name:?}; available: table1"
        ))),
        (None, Some(p)) => {
            let text = fs::read_to_string(p)?;
            Ok(load_scenario(&text)?)
        }
        _ => Err(CliError::Usage(
            "exactly one of --builtin or --scenario is required".into(),
        )),
    }
}

/// Protocol tuning shared by every subcommand.
#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub delta: f64,
    pub max_iters: usize,
    pub initial_bid: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            delta: upfair_core::protocol::DEFAULT_DELTA,
            max_iters: upfair_core::protocol::DEFAULT_MAX_ITERS,
            initial_bid: upfair_core::protocol::DEFAULT_INITIAL_BID,
        }
    }
}

impl Settings {
    fn configure(&self, stage: Stage, budget: f64) -> StageConfig {
        StageConfig {
            delta: self.delta,
            max_iters: self.max_iters,
            initial_bid: self.initial_bid,
            ..StageConfig::new(stage, budget)
        }
    }
}

/// Runs both stages at the given budgets.
pub fn execute_run(
    scenario: &Scenario,
    r_radar: f64,
    r_comm: f64,
    settings: &Settings,
) -> Result<AllocationResult> {
    let radar = settings.configure(Stage::Radar, r_radar);
    let comm = settings.configure(Stage::Comm, r_comm);
    Ok(run_two_stage(scenario, &radar, &comm)?)
}

// ---------------------------------------------------------------------------
// CSV rendering
// ---------------------------------------------------------------------------

/// One row per user: final rates from each band and the resulting
/// satisfaction.
pub fn allocation_csv(result: &AllocationResult) -> String {
    let mut out = String::from("ue_id,cell,sector,r_radar,r_comm,r_aggregate,utility\n");
    for u in &result.ues {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            u.ue_id, u.cell, u.sector, u.r_radar, u.r_comm, u.r_aggregate, u.utility
        ));
    }
    out
}

/// One row per sector group per iteration of each stage: aggregate bid,
/// shadow price, and the sector's share of the stage budget.
pub fn trace_csv(result: &AllocationResult) -> String {
    let mut out = String::from("stage,iteration,sector,aggregate_bid,price,sector_budget\n");
    for (stage, trace) in [("radar", &result.radar_trace), ("comm", &result.comm_trace)] {
        for record in &trace.records {
            for (l, ((w, p), r)) in record
                .aggregate_bids
                .iter()
                .zip(&record.prices)
                .zip(&record.sector_budgets)
                .enumerate()
            {
                out.push_str(&format!(
                    "{stage},{},{},{w},{p},{r}\n",
                    record.iteration,
                    l + 1
                ));
            }
        }
    }
    out
}

/// Writes `allocation.csv` and `trace.csv` under `out_dir`, creating the
/// directory if needed.
pub fn write_run_outputs(out_dir: &Path, result: &AllocationResult) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(out_dir)?;
    let allocation = out_dir.join("allocation.csv");
    let trace = out_dir.join("trace.csv");
    fs::write(&allocation, allocation_csv(result))?;
    fs::write(&trace, trace_csv(result))?;
    Ok((allocation, trace))
}

// ---------------------------------------------------------------------------
// sweeps
// ---------------------------------------------------------------------------

/// A sweep over the total bandwidth budget. Each point fills the radar band
/// first, up to the scenario's radar budget, and hands the remainder to the
/// communication band.
#[derive(Debug, Clone, Copy)]
pub struct SweepSpec {
    pub r_total_min: f64,
    pub r_total_max: f64,
    pub r_total_step: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.r_total_min.is_finite()
            && self.r_total_max.is_finite()
            && self.r_total_step.is_finite()
            && self.r_total_min >= 0.0
            && self.r_total_min <= self.r_total_max
            && self.r_total_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "invalid sweep range: min {} max {} step {}",
                self.r_total_min, self.r_total_max, self.r_total_step
            )))
        }
    }

    /// Sweep points, smallest first.
    pub fn points(&self) -> Vec<f64> {
        let count = ((self.r_total_max - self.r_total_min) / self.r_total_step + 1e-9) as usize;
        (0..=count)
            .map(|i| self.r_total_min + i as f64 * self.r_total_step)
            .collect()
    }
}

/// Budgets for one sweep point under the radar-first fill policy.
pub fn fill_budgets(scenario: &Scenario, r_total: f64) -> (f64, f64) {
    let r_radar = r_total.min(scenario.r_radar_total);
    (r_radar, r_total - r_radar)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows_written: usize,
    /// First sweep point that failed to converge, if any; rows up to and
    /// including it are preserved in the output file.
    pub aborted_at: Option<f64>,
}

fn sweep_header(sector_count: usize) -> String {
    let mut header = String::from("r_total,r_radar_used,r_comm_used");
    for prefix in ["radar_sector", "comm_sector", "aggregate_sector"] {
        for l in 1..=sector_count {
            header.push_str(&format!(",{prefix}_{l}"));
        }
    }
    header.push('\n');
    header
}

/// Runs the sweep and streams `sweep.csv` under `out_dir` row by row, so an
/// aborted sweep still leaves every completed point on disk. With `traces`
/// set, each point also gets a `trace_R<r_total>.csv`.
pub fn execute_sweep(
    scenario: &Scenario,
    spec: &SweepSpec,
    settings: &Settings,
    out_dir: &Path,
    traces: bool,
) -> Result<SweepOutcome> {
    spec.validate()?;
    fs::create_dir_all(out_dir)?;
    let mut file = fs::File::create(out_dir.join("sweep.csv"))?;
    file.write_all(sweep_header(scenario.sector_count).as_bytes())?;
    let mut rows_written = 0;
    for r_total in spec.points() {
        let (r_radar, r_comm) = fill_budgets(scenario, r_total);
        let result = execute_run(scenario, r_radar, r_comm, settings)?;
        let mut row = format!("{r_total},{r_radar},{r_comm}");
        for totals in [
            &result.radar_sector_totals,
            &result.comm_sector_totals,
            &result.aggregate_sector_totals,
        ] {
            for v in totals {
                row.push_str(&format!(",{v}"));
            }
        }
        row.push('\n');
        file.write_all(row.as_bytes())?;
        file.flush()?;
        rows_written += 1;
        if traces {
            let name = format!("trace_R{r_total}.csv");
            fs::write(out_dir.join(name), trace_csv(&result))?;
        }
        if !result.converged() {
            return Ok(SweepOutcome { rows_written, aborted_at: Some(r_total) });
        }
    }
    Ok(SweepOutcome { rows_written, aborted_at: None })
}

// ---------------------------------------------------------------------------
// oracle cross-check
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct OracleCheckRow {
    pub stage: &'static str,
    pub protocol_objective: f64,
    pub oracle_objective: f64,
    /// Oracle minus protocol; positive means the oracle found a better
    /// point.
    pub gap: f64,
}

/// Replays both stages and scores each against the continuous reference
/// solver on the pooled problem over that stage's participating users.
/// Stages with a zero budget are skipped.
pub fn execute_oracle_check(
    scenario: &Scenario,
    r_radar: f64,
    r_comm: f64,
    settings: &Settings,
) -> Result<Vec<OracleCheckRow>> {
    let zeros = vec![0.0; scenario.ues.len()];
    let radar_cfg = settings.configure(Stage::Radar, r_radar);
    let comm_cfg = settings.configure(Stage::Comm, r_comm);
    let stage1 = run_stage(scenario, &radar_cfg, &zeros)?;
    let stage2 = run_stage(scenario, &comm_cfg, &stage1.rates)?;

    let mut rows = Vec::new();
    if r_radar > 0.0 {
        let eligible: Vec<usize> = scenario
            .sector_groups()
            .iter()
            .filter(|g| !g.interfering)
            .flat_map(|g| g.members.iter().copied())
            .collect();
        let problem = OracleProblem::new(
            eligible.iter().map(|&i| scenario.ues[i].utility).collect(),
            vec![0.0; eligible.len()],
            r_radar,
        )?;
        let rates: Vec<f64> = eligible.iter().map(|&i| stage1.rates[i]).collect();
        rows.push(check_row("radar", &problem, &rates)?);
    }
    if r_comm > 0.0 {
        let problem = OracleProblem::new(
            scenario.ues.iter().map(|u| u.utility).collect(),
            stage1.rates.clone(),
            r_comm,
        )?;
        rows.push(check_row("comm", &problem, &stage2.rates)?);
    }
    Ok(rows)
}

fn check_row(stage: &'static str, problem: &OracleProblem, rates: &[f64]) -> Result<OracleCheckRow> {
    let protocol_objective = pooled_objective(problem, rates)?;
    let reference = oracle_ascent_solve(problem, 1e-10)?;
    let oracle_objective = pooled_objective(problem, &reference)?;
    Ok(OracleCheckRow {
        stage,
        protocol_objective,
        oracle_objective,
        gap: oracle_objective - protocol_objective,
    })
}

pub fn oracle_check_csv(rows: &[OracleCheckRow]) -> String {
    let mut out = String::from("stage,protocol_objective,oracle_objective,gap\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.stage, r.protocol_objective, r.oracle_objective, r.gap
        ));
    }
    out
}
