//! Distributed two-stage allocation protocol.
//!
//! Each iteration replays the signaling round trip of the real network:
//! users solve their scalar subproblem against the last shadow price and
//! submit bids, each sector's eNB aggregates the bids, the MME splits the
//! stage budget across sector groups in proportion to those aggregates, and
//! the eNBs price the next round as aggregate bids over sector budget. The
//! loop stops when no sector's aggregate bid moved by more than `delta`, and
//! each user's final rate is its bid divided by its sector price.
//!
//! Stage one hands out the radar-band budget with interfering sectors masked
//! to exactly zero. Stage two hands out the communication-band budget to
//! everyone, with each user's stage-one rate entering its utility as a
//! shift, which is what makes previously masked users bid hardest and catch
//! up.
//!
//! The bid-proportional split gives every active group the same price
//! `sum W / R`, so a group whose users all cornered at zero still receives
//! that market price as its signal and re-enters once the price drops below
//! its members' marginal value at their shifts. If every group goes quiet at
//! once, prices halve each round until somebody bids again; convergence is
//! never declared while the market is silent.

use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::subproblem::{bid_from_rate, solve_ue_rate, SubproblemSpec};

pub const DEFAULT_DELTA: f64 = 1e-3;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_INITIAL_BID: f64 = 1.0;

/// Iterations without meaningful progress before a group's bid updates are
/// damped. Each time the guard trips again the update step halves again,
/// which tames the steep-demand oscillations sigmoidal users cause when
/// spectrum is scarce.
pub const STALL_WINDOW: u32 = 50;

/// A bid residual must shrink below this fraction of the best residual seen
/// since the last damping trip to count as progress. Plain strict
/// improvement is not enough: a slowly decaying oscillation improves by a
/// hair every round and would dodge the guard for tens of thousands of
/// iterations.
const STALL_IMPROVEMENT: f64 = 0.9;

/// Which band a stage hands out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Radar,
    Comm,
}

/// Per-stage protocol settings.
#[derive(Debug, Clone, Copy)]
pub struct StageConfig {
    pub stage: Stage,
    /// Stage budget `R`; zero is allowed and makes the stage a no-op.
    pub budget: f64,
    /// Convergence threshold on each group's aggregate-bid change.
    pub delta: f64,
    pub max_iters: usize,
    pub initial_bid: f64,
}

impl StageConfig {
    pub fn new(stage: Stage, budget: f64) -> Self {
        StageConfig {
            stage,
            budget,
            delta: DEFAULT_DELTA,
            max_iters: DEFAULT_MAX_ITERS,
            initial_bid: DEFAULT_INITIAL_BID,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.budget.is_finite() || self.budget < 0.0 {
            return Err(Error::DomainViolation(format!(
                "stage budget must be non-negative and finite, got {}",
                self.budget
            )));
        }
        if !self.delta.is_finite() || self.delta <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "delta must be positive and finite, got {}",
                self.delta
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::DomainViolation("max_iters must be at least 1".into()));
        }
        if !self.initial_bid.is_finite() || self.initial_bid <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "initial_bid must be positive and finite, got {}",
                self.initial_bid
            )));
        }
        Ok(())
    }
}

/// Why a stage stopped iterating.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIters,
}

/// Snapshot of one signaling round: per-group aggregate bids `W`, shadow
/// prices `P`, and sector budgets `R^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub aggregate_bids: Vec<f64>,
    pub prices: Vec<f64>,
    pub sector_budgets: Vec<f64>,
}

/// Full iteration history of one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl ConvergenceTrace {
    fn empty() -> Self {
        ConvergenceTrace { records: Vec::new(), stop_reason: StopReason::Converged }
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }
}

/// Rates assigned by one stage, aligned with `Scenario::ues`.
#[derive(Debug, Clone)]
pub struct StageOutcome {
    pub rates: Vec<f64>,
    pub trace: ConvergenceTrace,
}

/// One user's share after both stages.
#[derive(Debug, Clone, PartialEq)]
pub struct UeAllocation {
    pub ue_id: String,
    pub cell: String,
    pub sector: usize,
    pub r_radar: f64,
    pub r_comm: f64,
    pub r_aggregate: f64,
    /// Satisfaction at the aggregate rate.
    pub utility: f64,
}

/// Result of a complete two-stage run.
#[derive(Debug, Clone)]
pub struct AllocationResult {
    pub ues: Vec<UeAllocation>,
    pub radar_sector_totals: Vec<f64>,
    pub comm_sector_totals: Vec<f64>,
    pub aggregate_sector_totals: Vec<f64>,
    pub radar_trace: ConvergenceTrace,
    pub comm_trace: ConvergenceTrace,
}

impl AllocationResult {
    pub fn converged(&self) -> bool {
        self.radar_trace.stop_reason == StopReason::Converged
            && self.comm_trace.stop_reason == StopReason::Converged
    }
}

// ---------------------------------------------------------------------------
// pricing and budget splitting
// ---------------------------------------------------------------------------

/// eNB pricing rule: the shadow price of a sector is its aggregate bid over
/// its sector budget.
pub fn shadow_price(bids: &[f64], sector_budget: f64) -> Result<f64> {
    if !sector_budget.is_finite() || sector_budget <= 0.0 {
        return Err(Error::DomainViolation(format!(
            "sector budget must be positive and finite, got {sector_budget}"
        )));
    }
    let mut total = 0.0;
    for &w in bids {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::DomainViolation(format!(
                "bids must be non-negative and finite, got {w}"
            )));
        }
        total += w;
    }
    if total == 0.0 {
        return Err(Error::DegeneratePrice { sector: 0 });
    }
    Ok(total / sector_budget)
}

/// MME splitting rule: the stage budget goes to non-excluded groups in
/// proportion to their aggregate bids; excluded groups get exactly zero.
/// When every admitted group has bid zero (the very first round) the budget
/// is split evenly. The last admitted group absorbs the rounding residual so
/// the shares always sum to the stage budget exactly.
pub fn mme_split_budget(
    total_budget: f64,
    aggregate_bids: &[f64],
    excluded: &[bool],
) -> Result<Vec<f64>> {
    if !total_budget.is_finite() || total_budget < 0.0 {
        return Err(Error::DomainViolation(format!(
            "total budget must be non-negative and finite, got {total_budget}"
        )));
    }
    if aggregate_bids.len() != excluded.len() {
        return Err(Error::DomainViolation(format!(
            "{} aggregate bids but {} mask entries",
            aggregate_bids.len(),
            excluded.len()
        )));
    }
    let admitted: Vec<usize> =
        (0..excluded.len()).filter(|&l| !excluded[l]).collect();
    if admitted.is_empty() {
        return Err(Error::NoEligibleGroup);
    }
    for &l in &admitted {
        let w = aggregate_bids[l];
        if !w.is_finite() || w < 0.0 {
            return Err(Error::DomainViolation(format!(
                "aggregate bids must be non-negative and finite, got {w}"
            )));
        }
    }
    let mut shares = vec![0.0; aggregate_bids.len()];
    let bid_sum: f64 = admitted.iter().map(|&l| aggregate_bids[l]).sum();
    let (&last, rest) = admitted.split_last().expect("admitted is non-empty");
    let mut assigned = 0.0;
    for &l in rest {
        shares[l] = if bid_sum > 0.0 {
            total_budget * aggregate_bids[l] / bid_sum
        } else {
            total_budget / admitted.len() as f64
        };
        assigned += shares[l];
    }
    shares[last] = total_budget - assigned;
    Ok(shares)
}

// ---------------------------------------------------------------------------
// stage loop
// ---------------------------------------------------------------------------

struct GroupView {
    members: Vec<usize>,
    /// Masked out of this stage (radar stage, interfering sector) or empty.
    excluded: bool,
}

/// Runs one bidding stage. `shifts[i]` is UE `i`'s rate carried over from
/// the previous stage (all zeros for stage one).
pub fn run_stage(
    scenario: &Scenario,
    config: &StageConfig,
    shifts: &[f64],
) -> Result<StageOutcome> {
    config.validate()?;
    let n_ues = scenario.ues.len();
    if shifts.len() != n_ues {
        return Err(Error::DomainViolation(format!(
            "{} shifts for {} UEs",
            shifts.len(),
            n_ues
        )));
    }
    for &s in shifts {
        if !s.is_finite() || s < 0.0 {
            return Err(Error::DomainViolation(format!(
                "shifts must be non-negative and finite, got {s}"
            )));
        }
    }
    if config.budget == 0.0 {
        return Ok(StageOutcome { rates: vec![0.0; n_ues], trace: ConvergenceTrace::empty() });
    }

    let groups: Vec<GroupView> = scenario
        .sector_groups()
        .into_iter()
        .map(|g| GroupView {
            excluded: (config.stage == Stage::Radar && g.interfering) || g.members.is_empty(),
            members: g.members,
        })
        .collect();
    if groups.iter().all(|g| g.excluded) {
        return Err(Error::NoEligibleGroup);
    }
    let n_groups = groups.len();
    let excluded: Vec<bool> = groups.iter().map(|g| g.excluded).collect();

    let mut bids = vec![0.0; n_ues];
    for g in groups.iter().filter(|g| !g.excluded) {
        for &i in &g.members {
            bids[i] = config.initial_bid;
        }
    }
    let mut prev_w = vec![0.0; n_groups];
    let mut last_price = vec![0.0; n_groups];
    let mut damp_exp = vec![0i32; n_groups];
    let mut best_delta = vec![f64::INFINITY; n_groups];
    let mut stall = vec![0u32; n_groups];
    let mut records = Vec::new();

    for n in 1..=config.max_iters {
        let w_agg: Vec<f64> = groups
            .iter()
            .map(|g| g.members.iter().map(|&i| bids[i]).sum())
            .collect();
        let total_w: f64 = w_agg
            .iter()
            .zip(&excluded)
            .filter(|(_, &ex)| !ex)
            .map(|(w, _)| w)
            .sum();
        let sector_budgets = mme_split_budget(config.budget, &w_agg, &excluded)?;

        let mut prices = vec![0.0; n_groups];
        for l in 0..n_groups {
            if excluded[l] {
                continue;
            }
            prices[l] = if w_agg[l] > 0.0 {
                w_agg[l] / sector_budgets[l]
            } else if total_w > 0.0 {
                // Dormant group: quote the market price so its users can
                // re-enter when the price falls far enough.
                total_w / config.budget
            } else {
                // Market-wide silence: decay prices until somebody bids.
                last_price[l] * 0.5
            };
            last_price[l] = prices[l];
        }
        records.push(IterationRecord {
            iteration: n,
            aggregate_bids: w_agg.clone(),
            prices: prices.clone(),
            sector_budgets: sector_budgets.clone(),
        });

        let converged = n >= 2
            && total_w > 0.0
            && (0..n_groups)
                .filter(|&l| !excluded[l])
                .all(|l| (w_agg[l] - prev_w[l]).abs() < config.delta);
        if converged || n == config.max_iters {
            let rates = (0..n_ues)
                .map(|i| {
                    if bids[i] == 0.0 {
                        0.0
                    } else {
                        bids[i] / prices[scenario.ues[i].sector - 1]
                    }
                })
                .collect();
            let stop_reason = if converged { StopReason::Converged } else { StopReason::MaxIters };
            return Ok(StageOutcome { rates, trace: ConvergenceTrace { records, stop_reason } });
        }

        if n >= 2 {
            for l in 0..n_groups {
                if excluded[l] {
                    continue;
                }
                let delta = (w_agg[l] - prev_w[l]).abs();
                if delta < best_delta[l] * STALL_IMPROVEMENT {
                    best_delta[l] = delta;
                    stall[l] = 0;
                } else {
                    stall[l] += 1;
                    if stall[l] >= STALL_WINDOW {
                        damp_exp[l] += 1;
                        stall[l] = 0;
                        best_delta[l] = delta;
                    }
                }
            }
        }

        for (l, g) in groups.iter().enumerate() {
            if g.excluded {
                continue;
            }
            let mut targets = Vec::with_capacity(g.members.len());
            let mut target_sum = 0.0;
            for &i in &g.members {
                let spec = SubproblemSpec {
                    utility: &scenario.ues[i].utility,
                    price: prices[l],
                    shift: shifts[i],
                    rate_cap: config.budget,
                };
                let t = bid_from_rate(prices[l], solve_ue_rate(&spec)?)?;
                targets.push(t);
                target_sum += t;
            }
            if damp_exp[l] == 0 {
                for (&i, &t) in g.members.iter().zip(&targets) {
                    bids[i] = t;
                }
            } else if target_sum > 0.0 {
                // Damping slows the group's aggregate movement, but each
                // member still bids its exact share of the group's best
                // response. Mixing old and new bids per user instead would
                // let members lag their targets in ways that cancel in the
                // aggregate, stalling the within-group split far from the
                // optimum while |delta W| looks converged.
                let step = 0.5f64.powi(damp_exp[l]);
                let damped = w_agg[l] + (target_sum - w_agg[l]) * step;
                let scale = damped / target_sum;
                for (&i, &t) in g.members.iter().zip(&targets) {
                    bids[i] = t * scale;
                }
            } else {
                for &i in &g.members {
                    bids[i] = 0.0;
                }
            }
        }
        prev_w = w_agg;
    }
    unreachable!("the loop returns at n == max_iters");
}

/// Runs stage one on the radar band (interfering sectors masked to zero)
/// and stage two on the communication band with stage-one rates as shifts.
pub fn run_two_stage(
    scenario: &Scenario,
    radar: &StageConfig,
    comm: &StageConfig,
) -> Result<AllocationResult> {
    if radar.stage != Stage::Radar || comm.stage != Stage::Comm {
        return Err(Error::DomainViolation(
            "run_two_stage takes a radar config then a comm config".into(),
        ));
    }
    let zeros = vec![0.0; scenario.ues.len()];
    let radar_outcome = run_stage(scenario, radar, &zeros)?;
    let comm_outcome = run_stage(scenario, comm, &radar_outcome.rates)?;

    let mut radar_sector_totals = vec![0.0; scenario.sector_count];
    let mut comm_sector_totals = vec![0.0; scenario.sector_count];
    let mut aggregate_sector_totals = vec![0.0; scenario.sector_count];
    let mut ues = Vec::with_capacity(scenario.ues.len());
    for (i, ue) in scenario.ues.iter().enumerate() {
        let r_radar = radar_outcome.rates[i];
        let r_comm = comm_outcome.rates[i];
        let r_aggregate = r_radar + r_comm;
        radar_sector_totals[ue.sector - 1] += r_radar;
        comm_sector_totals[ue.sector - 1] += r_comm;
        aggregate_sector_totals[ue.sector - 1] += r_aggregate;
        ues.push(UeAllocation {
            ue_id: ue.id.clone(),
            cell: ue.cell.clone(),
            sector: ue.sector,
            r_radar,
            r_comm,
            r_aggregate,
            utility: ue.utility.value(r_aggregate)?,
        });
    }
    Ok(AllocationResult {
        ues,
        radar_sector_totals,
        comm_sector_totals,
        aggregate_sector_totals,
        radar_trace: radar_outcome.trace,
        comm_trace: comm_outcome.trace,
    })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
