//! Independent reference solvers for the pooled allocation problem.
//!
//! Because the budget split is proportional to aggregate bids, every active
//! sector group settles at the same price, so a converged run must match the
//! optimum of the pooled problem: maximize the sum of log-utilities over all
//! participating users subject to their rates summing to the stage budget.
//! The two solvers here attack that problem by entirely different means than
//! the bidding loop and share no code with it beyond the utility functions:
//!
//! * [`oracle_grid_solve`] discretizes the budget into `M` equal ticks and
//!   runs an exact dynamic program over "best objective using the first `i`
//!   users and `t` ticks". Each layer is a max-plus convolution of concave
//!   sequences, so the argmax is monotone in `t` and a divide-and-conquer
//!   sweep computes the layer in `O(M log M)` instead of `O(M^2)`. The
//!   result is the true optimum of the discretized problem, which brackets
//!   the continuous optimum to within a slope bound times the tick size.
//!
//! * [`oracle_ascent_solve`] works in the continuous domain: cyclic
//!   coordinate ascent over all pairs, each pair re-split by bisection on
//!   the slope difference. For a strictly concave objective on the simplex,
//!   pairwise optimality is global optimality.

use crate::error::{Error, Result};
use crate::utility::UtilityFunction;

/// Cap on `users * (ticks + 1)` for the grid dynamic program.
pub const GRID_STATE_LIMIT: usize = 10_000_000;

const MAX_ASCENT_SWEEPS: usize = 10_000;

/// A pooled allocation problem: split `budget` across the users to maximize
/// the sum of `ln U_i(r_i + shift_i)`.
#[derive(Debug, Clone)]
pub struct OracleProblem {
    pub utilities: Vec<UtilityFunction>,
    pub shifts: Vec<f64>,
    pub budget: f64,
}

impl OracleProblem {
    pub fn new(utilities: Vec<UtilityFunction>, shifts: Vec<f64>, budget: f64) -> Result<Self> {
        if utilities.is_empty() {
            return Err(Error::InvalidParameter("oracle problem needs at least one user".into()));
        }
        if shifts.len() != utilities.len() {
            return Err(Error::InvalidParameter(format!(
                "{} shifts for {} users",
                shifts.len(),
                utilities.len()
            )));
        }
        for &s in &shifts {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "shifts must be non-negative and finite, got {s}"
                )));
            }
        }
        if !budget.is_finite() || budget <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "budget must be positive and finite, got {budget}"
            )));
        }
        Ok(OracleProblem { utilities, shifts, budget })
    }

    pub fn len(&self) -> usize {
        self.utilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utilities.is_empty()
    }
}

/// Sum of shifted log-utilities at `rates`. Minus infinity is a legitimate
/// value (some user at zero with no shift), not an error.
pub fn pooled_objective(problem: &OracleProblem, rates: &[f64]) -> Result<f64> {
    if rates.len() != problem.len() {
        return Err(Error::InvalidParameter(format!(
            "{} rates for {} users",
            rates.len(),
            problem.len()
        )));
    }
    let mut total = 0.0;
    for i in 0..problem.len() {
        total += problem.utilities[i].ln_value(rates[i] + problem.shifts[i])?;
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// grid dynamic program
// ---------------------------------------------------------------------------

/// Computes `out[t] = max_x (prev[t - x] + gain[x])` for all `t`, recording
/// the smallest maximizing `x`. Both inputs are concave sequences, so the
/// matrix of candidate values is totally monotone and the argmax for the
/// midpoint row confines the argmaxes of the halves.
fn max_plus_layer(prev: &[f64], gain: &[f64], out: &mut [f64], choice: &mut [u32]) {
    fn recurse(
        prev: &[f64],
        gain: &[f64],
        out: &mut [f64],
        choice: &mut [u32],
        t_lo: usize,
        t_hi: usize,
        x_lo: usize,
        x_hi: usize,
    ) {
        if t_lo > t_hi {
            return;
        }
        let t = t_lo + (t_hi - t_lo) / 2;
        let mut best_x = x_lo.min(t);
        let mut best = f64::NEG_INFINITY;
        for x in x_lo..=x_hi.min(t) {
            let val = prev[t - x] + gain[x];
            if val > best {
                best = val;
                best_x = x;
            }
        }
        out[t] = best;
        choice[t] = best_x as u32;
        if t > t_lo {
            recurse(prev, gain, out, choice, t_lo, t - 1, x_lo, best_x);
        }
        if t < t_hi {
            recurse(prev, gain, out, choice, t + 1, t_hi, best_x, x_hi);
        }
    }
    let m = prev.len() - 1;
    recurse(prev, gain, out, choice, 0, m, 0, m);
}

/// Exact optimum of the problem restricted to rates that are multiples of
/// `budget / M`, where `M = round(budget / step)`. Refuses problems whose
/// state count `users * (M + 1)` exceeds [`GRID_STATE_LIMIT`].
pub fn oracle_grid_solve(problem: &OracleProblem, step: f64) -> Result<Vec<f64>> {
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "grid step must be positive and finite, got {step}"
        )));
    }
    let n = problem.len();
    let m = ((problem.budget / step).round() as usize).max(1);
    let states = n
        .checked_mul(m + 1)
        .ok_or(Error::TooLarge { states: usize::MAX, limit: GRID_STATE_LIMIT })?;
    if states > GRID_STATE_LIMIT {
        return Err(Error::TooLarge { states, limit: GRID_STATE_LIMIT });
    }
    let unit = problem.budget / m as f64;

    let sample = |i: usize| -> Result<Vec<f64>> {
        (0..=m)
            .map(|t| problem.utilities[i].ln_value(t as f64 * unit + problem.shifts[i]))
            .collect()
    };

    let mut layer = sample(0)?;
    let mut choices: Vec<Vec<u32>> = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let gain = sample(i)?;
        let mut next = vec![f64::NEG_INFINITY; m + 1];
        let mut choice = vec![0u32; m + 1];
        max_plus_layer(&layer, &gain, &mut next, &mut choice);
        choices.push(choice);
        layer = next;
    }

    let mut ticks = vec![0usize; n];
    let mut t = m;
    for i in (1..n).rev() {
        let x = choices[i - 1][t] as usize;
        ticks[i] = x;
        t -= x;
    }
    ticks[0] = t;
    Ok(ticks.into_iter().map(|x| x as f64 * unit).collect())
}

// ---------------------------------------------------------------------------
// pairwise coordinate ascent
// ---------------------------------------------------------------------------

/// Best split of `total` between users `i` and `j`: returns `x`, user `i`'s
/// share. The slope difference is strictly decreasing in `x`, so after the
/// two corner checks a bisection pins the interior equal-slope point.
fn best_pair_split(problem: &OracleProblem, i: usize, j: usize, total: f64) -> Result<f64> {
    let (ui, si) = (&problem.utilities[i], problem.shifts[i]);
    let (uj, sj) = (&problem.utilities[j], problem.shifts[j]);
    if si > 0.0 && ui.ln_slope(si)? <= uj.ln_slope(total + sj)? {
        return Ok(0.0);
    }
    if sj > 0.0 && ui.ln_slope(total + si)? >= uj.ln_slope(sj)? {
        return Ok(total);
    }
    let mut lo = if si > 0.0 { 0.0 } else { total * 1e-12 };
    let mut hi = if sj > 0.0 { total } else { total * (1.0 - 1e-12) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ui.ln_slope(mid + si)? > uj.ln_slope(total - mid + sj)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * total {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Continuous optimum by cyclic pairwise redistribution. A sweep revisits
/// every pair; the run stops when a full sweep improves the objective by
/// less than `tol`. The returned rates sum to the budget exactly, with the
/// float residual absorbed by the largest component.
pub fn oracle_ascent_solve(problem: &OracleProblem, tol: f64) -> Result<Vec<f64>> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "ascent tolerance must be positive and finite, got {tol}"
        )));
    }
    let n = problem.len();
    if n == 1 {
        return Ok(vec![problem.budget]);
    }
    let mut rates = vec![problem.budget / n as f64; n];
    let mut last_gain = f64::INFINITY;
    for _sweep in 0..MAX_ASCENT_SWEEPS {
        let mut gain = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let total = rates[i] + rates[j];
                if total <= 0.0 {
                    continue;
                }
                let old = problem.utilities[i].ln_value(rates[i] + problem.shifts[i])?
                    + problem.utilities[j].ln_value(rates[j] + problem.shifts[j])?;
                let x = best_pair_split(problem, i, j, total)?;
                let new = problem.utilities[i].ln_value(x + problem.shifts[i])?
                    + problem.utilities[j].ln_value(total - x + problem.shifts[j])?;
                if new > old {
                    rates[i] = x;
                    rates[j] = total - x;
                    if old.is_finite() {
                        gain += new - old;
                    } else {
                        gain += 1.0;
                    }
                }
            }
        }
        if gain < tol {
            let sum: f64 = rates.iter().sum();
            let top = rates
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .expect("rates is non-empty");
            rates[top] += problem.budget - sum;
            return Ok(rates);
        }
        last_gain = gain;
    }
    Err(Error::AscentStalled { sweeps: MAX_ASCENT_SWEEPS, last_gain })
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
