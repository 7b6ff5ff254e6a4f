//! Two-stage utility proportional fairness for cellular networks that share
//! spectrum with a rotating radar.
//!
//! A radar sweep forces the sectors it currently illuminates off the shared
//! band. This crate allocates rate in two rounds: the radar-band budget goes
//! to the unaffected sectors first, then the communication-band budget goes
//! to everyone, with each user's round-one rate shifting its utility so that
//! the users silenced in round one bid hardest in round two. Rates are set
//! by a distributed bidding protocol (users solve a scalar subproblem
//! against a shadow price, base stations aggregate bids, the core splits
//! each budget across sector groups in proportion to those bids) and the
//! fixed point maximizes the product of user satisfactions.
//!
//! Module map:
//!
//! * [`utility`] - sigmoidal and logarithmic satisfaction curves with exact
//!   normalization and stable log-domain evaluation.
//! * [`subproblem`] - the per-user best response to a price.
//! * [`protocol`] - the bidding loop, budget splitting, and the two-stage
//!   driver.
//! * [`oracle`] - independent grid and coordinate-ascent reference solvers
//!   used to certify protocol output.
//! * [`scenario`] - network descriptions: cells, sectors, users, budgets,
//!   the interference mask, TOML loading, and the built-in 54-user example.
//! * [`error`] - the shared error type.

pub mod error;
pub mod oracle;
pub mod protocol;
pub mod scenario;
pub mod subproblem;
pub mod utility;

pub use error::{Error, Result};
pub use oracle::{oracle_ascent_solve, oracle_grid_solve, pooled_objective, OracleProblem};
pub use protocol::{
    run_stage, run_two_stage, AllocationResult, ConvergenceTrace, Stage, StageConfig,
    StageOutcome, StopReason, UeAllocation,
};
pub use scenario::{builtin_table1, load_scenario, save_scenario, Scenario, SectorGroup, Ue};
pub use subproblem::{solve_ue_rate, SubproblemSpec};
pub use utility::UtilityFunction;
