//! Acceptance gate for the two-stage allocator. Each test checks one
//! shipping criterion and prints a single PASS/FAIL line (visible with
//! `cargo test --test acceptance -- --nocapture`). Tolerances are pinned
//! here as constants.

use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use upfair_cli::{execute_oracle_check, execute_run, fill_budgets, Settings};
use upfair_core::protocol::{run_stage, Stage, StageConfig};
use upfair_core::scenario::{builtin_table1, Cell, Scenario, Ue};
use upfair_core::utility::UtilityFunction;
use upfair_core::{oracle_grid_solve, OracleProblem};

/// Criterion 2: communication-band total of the masked sector at a total
/// budget of 250, and its allowed error.
const KNEE_BUDGET: f64 = 250.0;
const KNEE_SECTOR3_COMM: f64 = 50.0;
const KNEE_TOL: f64 = 5.0;

/// Criterion 3: largest allowed pairwise gap between sector totals in the
/// no-mask baseline, as a fraction of their per-point mean.
const BASELINE_SIMILARITY: f64 = 0.10;

/// Criterion 4: grid pitch and the per-user rate tolerance derived from it.
const GRID_STEP: f64 = 1e-3;
const RATE_TOL: f64 = 1e-2; // max(10 * GRID_STEP, 1e-2)
const RANDOM_INSTANCES: usize = 20;

/// Criterion 5: allowed objective gap between protocol and reference
/// solver on the built-in scenario.
const OBJECTIVE_TOL: f64 = 1e-3;

/// Criterion 6: utility invariant tolerances.
const ZERO_RATE_TOL: f64 = 1e-12;
const LOG_CONCAVITY_TOL: f64 = 1e-9;
const SLOPE_FD_REL_TOL: f64 = 1e-5;
const MIDPOINT_TOL: f64 = 1e-12;

/// Criterion 7: convergence threshold, iteration ceiling, and the relative
/// slack between an interior user's log-slope and its group price.
const CONVERGENCE_DELTA: f64 = 1e-3;
const ITERATION_CEILING: usize = 10_000;
const KKT_REL_TOL: f64 = 0.01;
const INTERIOR_MARGIN: f64 = 1e-2;

fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn sweep_points() -> Vec<f64> {
    (1..=20).map(|i| 25.0 * i as f64).collect()
}

#[test]
fn criterion_1_interference_mask_is_exact() {
    let start = Instant::now();
    let s = builtin_table1();
    let result = execute_run(&s, s.r_radar_total, s.r_comm_total, &Settings::default()).unwrap();
    let masked: Vec<&str> = result
        .ues
        .iter()
        .filter(|u| u.sector == 3 && u.r_radar != 0.0)
        .map(|u| u.ue_id.as_str())
        .collect();
    verdict(
        1,
        "radar mask zeroes sector 3 exactly",
        masked.is_empty(),
        &format!(
            "54 users, {} masked-sector violations, {} ms",
            masked.len(),
            start.elapsed().as_millis()
        ),
    );
}

#[test]
fn criterion_2_budget_sweep_reproduces_the_catch_up_knee() {
    let start = Instant::now();
    let s = builtin_table1();
    let settings = Settings::default();
    let mut zero_violations = Vec::new();
    let mut knee_comm = f64::NAN;
    for r_total in sweep_points() {
        let (r_radar, r_comm) = fill_budgets(&s, r_total);
        let result = execute_run(&s, r_radar, r_comm, &settings).unwrap();
        assert!(result.converged(), "sweep point {r_total} did not converge");
        if r_total <= 200.0 && result.aggregate_sector_totals[2] != 0.0 {
            zero_violations.push(r_total);
        }
        if r_total == KNEE_BUDGET {
            knee_comm = result.comm_sector_totals[2];
        }
    }
    let knee_ok = (knee_comm - KNEE_SECTOR3_COMM).abs() <= KNEE_TOL;
    verdict(
        2,
        "masked sector stays at zero then soaks up the comm band",
        zero_violations.is_empty() && knee_ok,
        &format!(
            "pre-knee violations {:?}, sector-3 comm at {KNEE_BUDGET}: {knee_comm:.3} \
             (want {KNEE_SECTOR3_COMM} +- {KNEE_TOL}), 20 points in {} ms",
            zero_violations,
            start.elapsed().as_millis()
        ),
    );
}

#[test]
fn criterion_3_no_radar_baseline_sector_totals_stay_similar() {
    let start = Instant::now();
    let s = builtin_table1().without_interference();
    let settings = Settings::default();
    let mut worst_ratio = 0.0_f64;
    let mut worst_point = (0.0, Vec::new());
    for r_total in sweep_points() {
        let (r_radar, r_comm) = fill_budgets(&s, r_total);
        let result = execute_run(&s, r_radar, r_comm, &settings).unwrap();
        assert!(result.converged(), "sweep point {r_total} did not converge");
        let totals = result.aggregate_sector_totals.clone();
        let mean = totals.iter().sum::<f64>() / totals.len() as f64;
        for i in 0..totals.len() {
            for j in (i + 1)..totals.len() {
                let ratio = (totals[i] - totals[j]).abs() / mean;
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst_point = (r_total, totals.clone());
                }
            }
        }
    }
    verdict(
        3,
        "sector totals without the mask stay within 10% of their mean",
        worst_ratio < BASELINE_SIMILARITY,
        &format!(
            "worst pairwise gap {:.1}% of mean at r_total {} (sector totals {:?}), \
             20 points in {} ms",
            100.0 * worst_ratio,
            worst_point.0,
            worst_point.1.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            start.elapsed().as_millis()
        ),
    );
}

#[test]
fn criterion_4_protocol_matches_the_grid_oracle_on_random_instances() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x2a11_0c47_e5);
    let mut worst = 0.0_f64;
    for instance in 0..RANDOM_INSTANCES {
        let n = rng.gen_range(2..=4);
        let utilities: Vec<UtilityFunction> = (0..n)
            .map(|i| {
                let sigmoid = match i {
                    0 => true,
                    1 => false,
                    _ => rng.gen_bool(0.5),
                };
                if sigmoid {
                    let a = if rng.gen_bool(0.5) { 1.0 } else { 3.0 };
                    let b = rng.gen_range(5.0..18.0);
                    UtilityFunction::sigmoid(a, b).unwrap()
                } else {
                    let k = rng.gen_range(0.5..18.0);
                    UtilityFunction::logarithmic(k, 100.0).unwrap()
                }
            })
            .collect();
        let budget = rng.gen_range(5.0..40.0);

        let ues: Vec<Ue> = utilities
            .iter()
            .enumerate()
            .map(|(i, &utility)| Ue {
                id: format!("I{instance}U{i}"),
                cell: "X".into(),
                sector: 1,
                utility,
            })
            .collect();
        let scenario = Scenario {
            cells: vec![Cell { id: "X".into() }],
            sector_count: 1,
            ues,
            interference_mask: vec![false],
            r_radar_total: 0.0,
            r_comm_total: budget,
            default_log_r_max: 100.0,
        };
        let config = StageConfig {
            delta: 1e-6,
            max_iters: 200_000,
            ..StageConfig::new(Stage::Comm, budget)
        };
        let out = run_stage(&scenario, &config, &vec![0.0; n]).unwrap();

        let problem = OracleProblem::new(utilities, vec![0.0; n], budget).unwrap();
        let grid = oracle_grid_solve(&problem, GRID_STEP).unwrap();
        for i in 0..n {
            worst = worst.max((out.rates[i] - grid[i]).abs());
        }
    }
    verdict(
        4,
        "random small instances match the grid reference per user",
        worst <= RATE_TOL,
        &format!(
            "{RANDOM_INSTANCES} instances, worst per-user gap {worst:.2e} \
             (allowed {RATE_TOL}), {} ms",
            start.elapsed().as_millis()
        ),
    );
}

#[test]
fn criterion_5_builtin_objectives_match_the_continuous_reference() {
    let start = Instant::now();
    let s = builtin_table1();
    let rows =
        execute_oracle_check(&s, s.r_radar_total, s.r_comm_total, &Settings::default()).unwrap();
    let worst = rows.iter().map(|r| r.gap.abs()).fold(0.0, f64::max);
    verdict(
        5,
        "both stage objectives sit at the reference optimum",
        rows.len() == 2 && worst <= OBJECTIVE_TOL,
        &format!(
            "gaps {:?} (allowed {OBJECTIVE_TOL}), {} ms",
            rows.iter().map(|r| format!("{}: {:.2e}", r.stage, r.gap)).collect::<Vec<_>>(),
            start.elapsed().as_millis()
        ),
    );
}

#[test]
fn criterion_6_utility_curves_hold_their_invariants() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for ue in builtin_table1().ues {
        let u = ue.utility;
        if u.value(0.0).unwrap().abs() > ZERO_RATE_TOL {
            failures.push(format!("{}: nonzero value at zero rate", ue.id));
        }
        let span = match u {
            UtilityFunction::Sigmoid(p) => {
                let mid = u.value(p.b()).unwrap();
                let want = (1.0 - (-p.a() * p.b()).exp()) / 2.0;
                if (mid - want).abs() > MIDPOINT_TOL {
                    failures.push(format!("{}: inflection value off by {:.2e}", ue.id, mid - want));
                }
                p.b() + 2.0
            }
            UtilityFunction::Log(p) => p.r_max(),
        };
        for i in 1..=200 {
            let r = span * i as f64 / 200.0;
            let h = 1e-3;
            if u.value(r + h).unwrap() <= u.value(r).unwrap() {
                failures.push(format!("{}: not strictly increasing at {r}", ue.id));
                break;
            }
            let curvature = u.ln_value(r + h).unwrap() - 2.0 * u.ln_value(r).unwrap()
                + u.ln_value(r - h).unwrap();
            if curvature > LOG_CONCAVITY_TOL {
                failures.push(format!("{}: log-convex bump {curvature:.2e} at {r}", ue.id));
                break;
            }
            let fd_h = 1e-6 * r.max(1.0);
            let fd = (u.ln_value(r + fd_h).unwrap() - u.ln_value(r - fd_h).unwrap()) / (2.0 * fd_h);
            let analytic = u.ln_slope(r).unwrap();
            if (analytic - fd).abs() > SLOPE_FD_REL_TOL * analytic.abs() {
                failures.push(format!("{}: slope {analytic} vs finite difference {fd}", ue.id));
                break;
            }
        }
    }
    verdict(
        6,
        "all 54 utility curves are normalized, increasing, and log-concave",
        failures.is_empty(),
        &format!("failures {:?}, {} ms", failures, start.elapsed().as_millis()),
    );
}

#[test]
fn criterion_7_convergence_speed_and_stationarity() {
    let start = Instant::now();
    let s = builtin_table1();
    let settings = Settings { delta: CONVERGENCE_DELTA, ..Settings::default() };
    let result = execute_run(&s, s.r_radar_total, s.r_comm_total, &settings).unwrap();
    let radar_iters = result.radar_trace.iterations();
    let comm_iters = result.comm_trace.iterations();
    let converged = result.converged()
        && radar_iters < ITERATION_CEILING
        && comm_iters < ITERATION_CEILING;

    // Every user with an interior rate must see its log-slope pinned to the
    // group price; corner users (zero or the whole budget) are exempt.
    let mut worst_rel = 0.0_f64;
    let stages = [
        (&result.radar_trace, s.r_radar_total, false),
        (&result.comm_trace, s.r_comm_total, true),
    ];
    for (trace, budget, comm) in stages {
        let prices = &trace.records.last().unwrap().prices;
        for u in &result.ues {
            let (rate, shift) = if comm { (u.r_comm, u.r_radar) } else { (u.r_radar, 0.0) };
            if rate <= INTERIOR_MARGIN || rate >= budget - INTERIOR_MARGIN {
                continue;
            }
            let price = prices[u.sector - 1];
            let slope = s
                .ues
                .iter()
                .find(|s_ue| s_ue.id == u.ue_id)
                .unwrap()
                .utility
                .ln_slope(shift + rate)
                .unwrap();
            worst_rel = worst_rel.max((slope - price).abs() / price);
        }
    }
    verdict(
        7,
        "default run converges fast and satisfies stationarity",
        converged && worst_rel <= KKT_REL_TOL,
        &format!(
            "radar {radar_iters} and comm {comm_iters} iterations \
             (ceiling {ITERATION_CEILING}), worst interior slope-price gap \
             {:.3}% (allowed {:.0}%), {} ms",
            100.0 * worst_rel,
            100.0 * KKT_REL_TOL,
            start.elapsed().as_millis()
        ),
    );
}

#[test]
fn criterion_8_repeated_runs_emit_identical_bytes() {
    let start = Instant::now();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let out = Command::new(env!("CARGO_BIN_EXE_upfair"))
            .args(["run", "--builtin", "table1", "--out"])
            .arg(dir.path())
            .output()
            .expect("binary runs");
        assert_eq!(out.status.code(), Some(0));
    }
    let mut identical = true;
    for name in ["allocation.csv", "trace.csv"] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        identical &= a == b;
    }
    verdict(
        8,
        "consecutive runs are byte-identical",
        identical,
        &format!("allocation.csv and trace.csv compared, {} ms", start.elapsed().as_millis()),
    );
}
