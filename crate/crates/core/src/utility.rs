//! Application satisfaction curves.
//!
//! Real-time traffic (voice, video) is modeled with a normalized sigmoid,
//! delay-tolerant traffic (file transfer) with a normalized logarithm. Both
//! satisfy `U(0) = 0`, are strictly increasing, and have strictly concave
//! `ln U`, which is what makes the proportional-fairness objective
//! `sum of ln U_i` a concave program with a unique optimum.
//!
//! Besides the plain value, solvers need `d/dr ln U(r)`, the logarithmic
//! slope. It is strictly decreasing, blows up as `r -> 0+`, and vanishes as
//! `r -> inf`, so "slope equals price" always has a unique root.

use crate::error::{Error, Result};

/// Sigmoidal utility `U(r) = c * (1 / (1 + e^{-a (r - b)}) - d)`.
///
/// `a` controls the steepness and `b` is the inflection rate. The constants
/// `c = (1 + e^{ab}) / e^{ab}` and `d = 1 / (1 + e^{ab})` are derived at
/// construction so that `U(0) = 0` and `U(inf) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmoidParams {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl SigmoidParams {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || a <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigmoid steepness a must be positive and finite, got {a}"
            )));
        }
        if !b.is_finite() || b <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sigmoid inflection b must be positive and finite, got {b}"
            )));
        }
        let e_ab = (a * b).exp();
        Ok(Self {
            a,
            b,
            c: (1.0 + e_ab) / e_ab,
            d: 1.0 / (1.0 + e_ab),
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Derived normalization factor `(1 + e^{ab}) / e^{ab}`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Derived offset `1 / (1 + e^{ab})`.
    pub fn d(&self) -> f64 {
        self.d
    }
}

/// Logarithmic utility `U(r) = ln(1 + k r) / ln(1 + k r_max)`.
///
/// `U(r_max) = 1`; rates above `r_max` extrapolate smoothly past 1 rather
/// than clamping, so the function stays strictly increasing everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogParams {
    k: f64,
    r_max: f64,
}

impl LogParams {
    pub fn new(k: f64, r_max: f64) -> Result<Self> {
        if !k.is_finite() || k <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "log utility rate of increase k must be positive and finite, got {k}"
            )));
        }
        if !r_max.is_finite() || r_max <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "log utility r_max must be positive and finite, got {r_max}"
            )));
        }
        Ok(Self { k, r_max })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }
}

/// A user's satisfaction curve, either sigmoidal or logarithmic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UtilityFunction {
    Sigmoid(SigmoidParams),
    Log(LogParams),
}

impl UtilityFunction {
    pub fn sigmoid(a: f64, b: f64) -> Result<Self> {
        Ok(UtilityFunction::Sigmoid(SigmoidParams::new(a, b)?))
    }

    pub fn logarithmic(k: f64, r_max: f64) -> Result<Self> {
        Ok(UtilityFunction::Log(LogParams::new(k, r_max)?))
    }

    /// Evaluates `U(r)` for `r >= 0`.
    ///
    /// The sigmoid is computed in the algebraically equivalent form
    /// `(1 - e^{-a r}) / (1 + e^{a (b - r)})`, which avoids the catastrophic
    /// cancellation of `c * (s - d)` near `r = 0` and yields `U(0) = 0` and
    /// `U(b) = (1 - e^{-a b}) / 2` exactly.
    pub fn value(&self, rate: f64) -> Result<f64> {
        check_rate(rate)?;
        Ok(match self {
            UtilityFunction::Sigmoid(p) => {
                let numer = -(-p.a * rate).exp_m1();
                let denom = 1.0 + (p.a * (p.b - rate)).exp();
                numer / denom
            }
            UtilityFunction::Log(p) => (p.k * rate).ln_1p() / (p.k * p.r_max).ln_1p(),
        })
    }

    /// Evaluates `ln U(r)` for `r >= 0`; returns `-inf` at `r = 0`.
    pub fn ln_value(&self, rate: f64) -> Result<f64> {
        check_rate(rate)?;
        Ok(match self {
            UtilityFunction::Sigmoid(p) => {
                let ln_numer = (-(-p.a * rate).exp_m1()).ln();
                ln_numer - softplus(p.a * (p.b - rate))
            }
            UtilityFunction::Log(p) => {
                (p.k * rate).ln_1p().ln() - (p.k * p.r_max).ln_1p().ln()
            }
        })
    }

    /// Evaluates the logarithmic slope `d/dr ln U(r)` for `r > 0`.
    ///
    /// Sigmoid: `a / (e^{a r} - 1) + a / (1 + e^{a (r - b)})`.
    /// Logarithm: `k / ((1 + k r) ln(1 + k r))`.
    pub fn ln_slope(&self, rate: f64) -> Result<f64> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(Error::DomainViolation(format!(
                "ln_slope needs a strictly positive rate, got {rate}"
            )));
        }
        Ok(match self {
            UtilityFunction::Sigmoid(p) => {
                p.a / (p.a * rate).exp_m1() + p.a / (1.0 + (p.a * (rate - p.b)).exp())
            }
            UtilityFunction::Log(p) => {
                let x = p.k * rate;
                p.k / ((1.0 + x) * x.ln_1p())
            }
        })
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if !rate.is_finite() || rate < 0.0 {
        return Err(Error::DomainViolation(format!(
            "rate must be finite and non-negative, got {rate}"
        )));
    }
    Ok(())
}

/// `ln(1 + e^x)` without overflow for large `x`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

// ---------------------------------------------------------------------------
// tests
// ---------------------------------------------------------------------------
