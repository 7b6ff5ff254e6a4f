//! Per-user scalar subproblem.
//!
//! Given the sector's current shadow price `P`, each user solves
//!
//! ```text
//! maximize  ln U(r + shift) - P * r    over  0 <= r <= rate_cap
//! ```
//!
//! and reports the bid `w = P * r`. The shift is the rate the user already
//! holds from an earlier stage, so a user who is well served keeps its hands
//! off scarce spectrum (corner at 0) while an unserved user bids hard. Since
//! `ln U` is strictly concave and its slope spans `(0, inf)`, the optimum is
//! the unique root of `slope(r + shift) = P`, clipped to the feasible box.

use crate::error::{Error, Result};
use crate::utility::UtilityFunction;

/// Absolute tolerance on the rate returned by [`solve_ue_rate`].
pub const RATE_TOLERANCE: f64 = 1e-9;

/// Lower bracket used when `shift = 0`, where the slope diverges.
const ZERO_SHIFT_FLOOR: f64 = 1e-12;

/// One user's view of the stage: its utility, the sector price, the rate it
/// carries over from the previous stage, and the per-stage cap.
#[derive(Debug, Clone, Copy)]
pub struct SubproblemSpec<'a> {
    pub utility: &'a UtilityFunction,
    pub price: f64,
    pub shift: f64,
    pub rate_cap: f64,
}

impl SubproblemSpec<'_> {
    fn validate(&self) -> Result<()> {
        if !self.price.is_finite() || self.price <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "price must be positive and finite, got {}",
                self.price
            )));
        }
        if !self.shift.is_finite() || self.shift < 0.0 {
            return Err(Error::DomainViolation(format!(
                "shift must be non-negative and finite, got {}",
                self.shift
            )));
        }
        if !self.rate_cap.is_finite() || self.rate_cap <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "rate_cap must be positive and finite, got {}",
                self.rate_cap
            )));
        }
        Ok(())
    }
}

/// Solves the scalar subproblem to [`RATE_TOLERANCE`].
///
/// Corner cases first: a shifted user whose slope at the shift already sits
/// at or below the price wants nothing; a user whose slope at the cap still
/// exceeds the price takes the whole cap. Otherwise the root is bracketed
/// and bisected, which cannot fail because the slope is strictly decreasing.
pub fn solve_ue_rate(spec: &SubproblemSpec<'_>) -> Result<f64> {
    spec.validate()?;
    let slope_minus_price = |r: f64| -> Result<f64> {
        Ok(spec.utility.ln_slope(r + spec.shift)? - spec.price)
    };

    if spec.shift > 0.0 && spec.utility.ln_slope(spec.shift)? <= spec.price {
        return Ok(0.0);
    }
    if slope_minus_price(spec.rate_cap)? >= 0.0 {
        return Ok(spec.rate_cap);
    }

    let mut lo = if spec.shift > 0.0 { 0.0 } else { ZERO_SHIFT_FLOOR };
    if spec.shift == 0.0 && slope_minus_price(lo)? <= 0.0 {
        // The price exceeds the slope even a hair above zero.
        return Ok(0.0);
    }
    let mut hi = spec.rate_cap;
    while hi - lo > RATE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if slope_minus_price(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The bid a user submits for a solved rate: `w = price * rate`.
pub fn bid_from_rate(price: f64, rate: f64) -> Result<f64> {
    if !price.is_finite() || price <= 0.0 {
        return Err(Error::DomainViolation(format!(
            "price must be positive and finite, got {price}"
        )));
    }
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::DomainViolation(format!(
            "rate must be non-negative and finite, got {rate}"
        )));
    }
    Ok(price * rate)
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn objective(u: &UtilityFunction, price: f64, shift: f64, r: f64) -> f64 {
        u.ln_value(r + shift).unwrap() - price * r
    }

    /// Independent oracle: exhaustive scan of the objective on a rate grid.
    fn grid_argmax(u: &UtilityFunction, price: f64, shift: f64, cap: f64, step: f64) -> f64 {
        let n = (cap / step).round() as usize;
        let mut best_r = 0.0;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..=n {
            let r = cap * i as f64 / n as f64;
            let v = objective(u, price, shift, r);
            if v > best_v {
                best_v = v;
                best_r = r;
            }
        }
        best_r
    }

    #[test]
    fn log_utility_interior_optimum_matches_grid() {
        let u = UtilityFunction::logarithmic(1.0, 100.0).unwrap();
        let spec = SubproblemSpec { utility: &u, price: 0.05, shift: 0.0, rate_cap: 100.0 };
        let solved = solve_ue_rate(&spec).unwrap();
        let gridded = grid_argmax(&u, 0.05, 0.0, 100.0, 1e-4);
        assert!((solved - gridded).abs() <= 1e-3, "solved {solved}, grid {gridded}");
        assert!((solved - 8.07).abs() < 0.01);
    }

    #[test]
    fn saturated_user_corners_at_zero() {
        let u = UtilityFunction::logarithmic(1.0, 100.0).unwrap();
        // slope at shift 50 is about 0.005, well below the price
        let spec = SubproblemSpec { utility: &u, price: 0.05, shift: 50.0, rate_cap: 100.0 };
        assert_eq!(solve_ue_rate(&spec).unwrap(), 0.0);
    }

    #[test]
    fn near_free_spectrum_hits_the_cap_region() {
        let u = UtilityFunction::sigmoid(3.0, 10.0).unwrap();
        let spec = SubproblemSpec { utility: &u, price: 1e-6, shift: 0.0, rate_cap: 100.0 };
        let solved = solve_ue_rate(&spec).unwrap();
        // Optimality certificate: no grid point does better.
        let solved_v = objective(&u, 1e-6, 0.0, solved);
        let gridded = grid_argmax(&u, 1e-6, 0.0, 100.0, 1e-3);
        assert!(solved_v >= objective(&u, 1e-6, 0.0, gridded) - 1e-9);
        assert!(solved > 10.0);
    }

    #[test]
    fn cap_binds_when_price_is_tiny() {
        let u = UtilityFunction::logarithmic(1.0, 100.0).unwrap();
        let spec = SubproblemSpec { utility: &u, price: 1e-9, shift: 0.0, rate_cap: 5.0 };
        assert_eq!(solve_ue_rate(&spec).unwrap(), 5.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let u = UtilityFunction::logarithmic(1.0, 100.0).unwrap();
        let bad_price = SubproblemSpec { utility: &u, price: 0.0, shift: 0.0, rate_cap: 1.0 };
        assert!(solve_ue_rate(&bad_price).is_err());
        let bad_shift = SubproblemSpec { utility: &u, price: 1.0, shift: -1.0, rate_cap: 1.0 };
        assert!(solve_ue_rate(&bad_shift).is_err());
        let bad_cap = SubproblemSpec { utility: &u, price: 1.0, shift: 0.0, rate_cap: 0.0 };
        assert!(solve_ue_rate(&bad_cap).is_err());
        assert!(bid_from_rate(0.0, 1.0).is_err());
        assert!(bid_from_rate(1.0, -1.0).is_err());
        assert_eq!(bid_from_rate(0.25, 8.0).unwrap(), 2.0);
    }

    proptest! {
        /// 1000-point optimality certificate with 1e-9 slack.
        #[test]
        fn solution_dominates_random_feasible_rates(
            price in 1e-4f64..5.0,
            seed in any::<u64>(),
        ) {
            let u = UtilityFunction::sigmoid(3.0, 10.0).unwrap();
            let spec = SubproblemSpec { utility: &u, price, shift: 0.0, rate_cap: 50.0 };
            let star = solve_ue_rate(&spec).unwrap();
            let star_v = objective(&u, price, 0.0, star);
            let mut state = seed | 1;
            for _ in 0..1000 {
                // xorshift is plenty for scattering probe points
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                let r = (state as f64 / u64::MAX as f64) * 50.0;
                prop_assert!(star_v >= objective(&u, price, 0.0, r) - 1e-9);
            }
        }

        /// Higher price never buys more rate.
        #[test]
        fn monotone_in_price(p1 in 1e-4f64..2.0, factor in 1.01f64..50.0) {
            let u = UtilityFunction::logarithmic(2.0, 100.0).unwrap();
            let lo = SubproblemSpec { utility: &u, price: p1, shift: 0.0, rate_cap: 100.0 };
            let hi = SubproblemSpec { utility: &u, price: p1 * factor, shift: 0.0, rate_cap: 100.0 };
            let r_lo = solve_ue_rate(&lo).unwrap();
            let r_hi = solve_ue_rate(&hi).unwrap();
            prop_assert!(r_hi <= r_lo + RATE_TOLERANCE);
        }

        /// For interior solutions, solving with a shift just translates the
        /// unshifted solution: solve(shift) + shift = solve(0).
        #[test]
        fn shift_translates_interior_solutions(shift in 0.5f64..6.0) {
            let u = UtilityFunction::logarithmic(1.0, 100.0).unwrap();
            let price = 0.02;
            let plain = SubproblemSpec { utility: &u, price, shift: 0.0, rate_cap: 100.0 };
            let shifted = SubproblemSpec { utility: &u, price, shift, rate_cap: 100.0 };
            let r0 = solve_ue_rate(&plain).unwrap();
            let rs = solve_ue_rate(&shifted).unwrap();
            prop_assert!(rs > 0.0 && rs < 100.0 && r0 < 100.0);
            prop_assert!((rs + shift - r0).abs() <= 10.0 * RATE_TOLERANCE);
        }
    }
}
