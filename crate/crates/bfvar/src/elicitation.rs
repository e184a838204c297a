//! Translating probability statements about the sd ratio delta into the
//! prior shape alpha.
//!
//! Under the symmetric prior, rho = delta^2 / (1 + delta^2) is
//! Beta(alpha, alpha), so every interval probability is a difference of
//! regularized incomplete beta values; truncated targets condition on the
//! truncation interval.

use crate::error::{domain, numeric, Result};
use crate::specfun::reg_inc_beta;
use crate::two_sample::{rho_of_delta, DeltaInterval};

/// A constraint "P(delta in interval) = prob", optionally under a prior
/// truncated to a larger interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElicitationTarget {
    interval: DeltaInterval,
    prob: f64,
    truncation: Option<DeltaInterval>,
}

impl ElicitationTarget {
    pub fn new(interval: DeltaInterval, prob: f64, truncation: Option<DeltaInterval>) -> Result<Self> {
        if !(0.0 < prob && prob < 1.0) {
            return Err(domain(format!("target probability must lie in (0, 1), got {prob}")));
        }
        if let Some(t) = &truncation {
            if interval.lo() < t.lo() || interval.hi() > t.hi() {
                return Err(domain("target interval must lie within the truncation interval"));
            }
        }
        Ok(ElicitationTarget { interval, prob, truncation })
    }

    pub fn interval(&self) -> &DeltaInterval {
        &self.interval
    }

    pub fn prob(&self) -> f64 {
        self.prob
    }

    pub fn truncation(&self) -> Option<&DeltaInterval> {
        self.truncation.as_ref()
    }
}

/// P(delta in interval) under the prior with shape alpha, conditioned on the
/// truncation interval when given.
pub fn delta_interval_prob(interval: &DeltaInterval, alpha: f64, truncation: Option<&DeltaInterval>) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(domain(format!("alpha must be finite and positive, got {alpha}")));
    }
    let mass = |iv: &DeltaInterval| -> Result<f64> {
        let lo = rho_of_delta(iv.lo());
        let hi = rho_of_delta(iv.hi());
        Ok(reg_inc_beta(hi, alpha, alpha)? - reg_inc_beta(lo, alpha, alpha)?)
    };
    let p = mass(interval)?;
    match truncation {
        None => Ok(p.clamp(0.0, 1.0)),
        Some(t) => {
            if interval.lo() < t.lo() || interval.hi() > t.hi() {
                return Err(domain("interval must lie within the truncation interval"));
            }
            let m = mass(t)?;
            if m <= 0.0 {
                return Err(domain("truncation interval has zero prior mass"));
            }
            Ok((p / m).clamp(0.0, 1.0))
        }
    }
}

const LOG_ALPHA_LO: f64 = -9.210340371976182; // ln 1e-4
const LOG_ALPHA_HI: f64 = 9.210340371976184; // ln 1e4

/// Solve for the alpha that attains the target probability, by bracketed
/// bisection on ln alpha over [1e-4, 1e4] followed by a secant polish.
pub fn solve_alpha(target: &ElicitationTarget) -> Result<f64> {
    let eval = |la: f64| -> Result<f64> {
        delta_interval_prob(&target.interval, la.exp(), target.truncation.as_ref())
    };
    let p_lo = eval(LOG_ALPHA_LO)?;
    let p_hi = eval(LOG_ALPHA_HI)?;
    let want = target.prob;
    let f_lo = p_lo - want;
    let f_hi = p_hi - want;
    if f_lo == 0.0 {
        return Ok(LOG_ALPHA_LO.exp());
    }
    if f_hi == 0.0 {
        return Ok(LOG_ALPHA_HI.exp());
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(domain(format!(
            "target probability {want} is not attainable: over alpha in [1e-4, 1e4] \
             the interval probability ranges between {:.6} and {:.6}",
            p_lo.min(p_hi),
            p_lo.max(p_hi)
        )));
    }
    let mut lo = LOG_ALPHA_LO;
    let mut hi = LOG_ALPHA_HI;
    let mut flo = f_lo;
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        let fm = eval(mid)? - want;
        if fm == 0.0 {
            return Ok(mid.exp());
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    // secant polish from the bisection bracket
    let mut x0 = lo;
    let mut x1 = hi;
    let mut f0 = eval(x0)? - want;
    let mut f1 = eval(x1)? - want;
    for _ in 0..40 {
        if (f1 - f0).abs() < 1e-300 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !x2.is_finite() || x2 < LOG_ALPHA_LO || x2 > LOG_ALPHA_HI {
            break;
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = eval(x1)? - want;
        if f1.abs() < 1e-14 {
            break;
        }
    }
    let alpha = if f1.abs() < f0.abs() { x1.exp() } else { x0.exp() };
    let achieved = delta_interval_prob(&target.interval, alpha, target.truncation.as_ref())?;
    if (achieved - want).abs() > 1e-10 {
        return Err(numeric(format!(
            "root finding stalled: best alpha {alpha} attains probability {achieved}, target {want}"
        )));
    }
    Ok(alpha)
}
